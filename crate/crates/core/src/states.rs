//! Constructors for the states used by the gate model: coherent states,
//! cat qubits, squeezed vacuum, the phenomenological squeezer state and
//! entangled cat-pair probes.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityOperator, FockKet, Mode, ModeOperator, Tensor, C64, TRUNCATION_TOL};

/// Single-mode cutoff used for α ≤ 1.5.
pub const DEFAULT_CUTOFF: usize = 20;
/// Per-mode cutoff for two-mode entangled computations.
pub const TWO_MODE_CUTOFF: usize = 30;

/// Extra Fock levels used while exponentiating the squeeze generator.
const SQUEEZE_PAD: usize = 40;
/// Below this norm² a superposition is treated as the zero vector.
const ZERO_NORM_SQR: f64 = 1e-9;

/// Coordinates `(θ, φ)` on the cat-qubit Bloch sphere. `θ` may be negative
/// to describe gate targets `|ψ_{-θ,φ}⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub theta: f64,
    pub phi: f64,
}

impl BlochPoint {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Ideal output of the phase gate: `|ψ_{-θ,φ}⟩`.
    pub fn flipped(&self) -> Self {
        Self {
            theta: -self.theta,
            phi: self.phi,
        }
    }
}

/// Logical `|+⟩` (even cat) or `|−⟩` (odd cat).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn opposite(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Smallest cutoff (≥ 4) whose top two levels hold less than `tol` of a
/// coherent state of amplitude `alpha`.
pub fn adequate_cutoff(alpha: f64, tol: f64) -> usize {
    let mut cutoff = 4;
    loop {
        // Poisson tail P(n ≥ cutoff - 1)
        let mut term = (-alpha * alpha).exp();
        let mut below = 0.0;
        for n in 0..cutoff - 1 {
            below += term;
            term *= alpha * alpha / (n + 1) as f64;
        }
        let mut tail = 0.0;
        let mut n = cutoff - 1;
        while term > 1e-300 && n < cutoff + 400 {
            tail += term;
            n += 1;
            term *= alpha * alpha / n as f64;
        }
        if tail < tol && below > 0.0 {
            return cutoff;
        }
        cutoff += 1;
    }
}

/// Coherent state `|α⟩` for real `α`.
pub fn coherent(alpha: f64, cutoff: usize) -> Result<FockKet> {
    if !alpha.is_finite() {
        return Err(Error::param("alpha", "must be finite"));
    }
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut c = (-alpha * alpha / 2.0).exp();
    for n in 0..=cutoff {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        amps.push(C64::from(c));
    }
    let ket = FockKet::new(amps)?;
    ket.check_truncation()?;
    ket.normalized()
}

/// Cat-qubit encoding parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatQubitSpec {
    pub alpha: f64,
    pub cutoff: usize,
}

impl CatQubitSpec {
    pub fn new(alpha: f64, cutoff: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("{alpha} (must be > 0)")));
        }
        Ok(Self { alpha, cutoff })
    }

    /// `𝒩_+ = 1/√(2(1 + e^{-2α²}))`.
    pub fn n_plus(&self) -> f64 {
        (2.0 * (1.0 + (-2.0 * self.alpha * self.alpha).exp())).sqrt().recip()
    }

    /// `𝒩_- = 1/√(2(1 - e^{-2α²}))`.
    pub fn n_minus(&self) -> f64 {
        (2.0 * (1.0 - (-2.0 * self.alpha * self.alpha).exp())).sqrt().recip()
    }

    pub fn normalization(&self, parity: Parity) -> f64 {
        match parity {
            Parity::Even => self.n_plus(),
            Parity::Odd => self.n_minus(),
        }
    }

    pub fn cat(&self, b: BlochPoint) -> Result<FockKet> {
        cat_state(self.alpha, self.cutoff, b)
    }

    /// `|+⟩` or `|−⟩`.
    pub fn logical(&self, parity: Parity) -> Result<FockKet> {
        let plus = coherent(self.alpha, self.cutoff)?;
        let minus = coherent(-self.alpha, self.cutoff)?;
        // real ±1 weights keep the parity exact (e^{iπ} would leave rounding residue)
        let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
        FockKet::superpose(&[(C64::from(1.0), &plus), (C64::from(sign), &minus)])?.normalized()
    }
}

/// `|ψ_{θ,φ}⟩ ∝ cos(θ/2)|α⟩ + e^{iφ} sin(θ/2)|−α⟩`.
pub fn cat_state(alpha: f64, cutoff: usize, b: BlochPoint) -> Result<FockKet> {
    let plus = coherent(alpha, cutoff)?;
    let minus = coherent(-alpha, cutoff)?;
    let (s, c) = (b.theta / 2.0).sin_cos();
    let raw = FockKet::superpose(&[(C64::from(c), &plus), (C64::from_polar(s, b.phi), &minus)])?;
    if raw.norm_sqr() < ZERO_NORM_SQR {
        return Err(Error::ZeroNorm(format!(
            "cat superposition at alpha={alpha}, theta={}, phi={}",
            b.theta, b.phi
        )));
    }
    raw.normalized()
}

/// Squeezed vacuum with x-quadrature variance `s/2`.
pub fn squeezed_vacuum(s: f64, cutoff: usize) -> Result<FockKet> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::param("s", format!("{s} (must be in (0, 1])")));
    }
    let r = -s.ln() / 2.0;
    let t = -r.tanh();
    let mut amps = vec![C64::from(0.0); cutoff + 1];
    let mut c = r.cosh().sqrt().recip();
    for k in 0..=cutoff / 2 {
        if k > 0 {
            // √((2k)!)/(2^k k!) recursion
            c *= t * ((2 * k - 1) as f64 / (2 * k) as f64).sqrt();
        }
        amps[2 * k] = C64::from(c);
    }
    let ket = FockKet::new(amps)?;
    ket.check_truncation()?;
    ket.normalized()
}

/// Squeeze operator `S(r) = exp(r(a² − a†²)/2)`, which scales `x` by `e^{-r}`.
///
/// The generator is exponentiated on a padded space and cropped back to
/// `cutoff`; callers are responsible for checking that the states they
/// squeeze stay inside the cropped space.
pub fn squeeze_operator(r: f64, cutoff: usize) -> ModeOperator {
    let work = padded_squeeze(r, cutoff + SQUEEZE_PAD);
    let d = cutoff + 1;
    let m = CMatrix::from_fn(d, d, |i, j| C64::from(work[(i, j)]));
    ModeOperator::from_matrix(cutoff, 1, m).expect("square matrix of matching size")
}

fn padded_squeeze(r: f64, work_cutoff: usize) -> DMatrix<f64> {
    let d = work_cutoff + 1;
    let generator = DMatrix::from_fn(d, d, |i, j| {
        if j == i + 2 {
            // a²: ⟨i|a²|i+2⟩
            0.5 * r * (((i + 1) * (i + 2)) as f64).sqrt()
        } else if i == j + 2 {
            -0.5 * r * (((j + 1) * (j + 2)) as f64).sqrt()
        } else {
            0.0
        }
    });
    generator.exp()
}

/// Phenomenological source: an ideal squeezer with noise reduction `s`
/// followed by a parasite phase-insensitive gain `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezerModel {
    pub s: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl SqueezerModel {
    pub fn new(s: f64, h: f64) -> Result<Self> {
        let m = Self { s, h, gamma: None };
        m.validate()?;
        Ok(m)
    }

    /// `h = cosh(γ r)` with `s = e^{-2r}`.
    pub fn from_gamma(s: f64, gamma: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::param("s", format!("{s} (must be in (0, 1])")));
        }
        let r = -s.ln() / 2.0;
        let m = Self {
            s,
            h: (gamma * r).cosh(),
            gamma: Some(gamma),
        };
        m.validate()?;
        Ok(m)
    }

    /// Inverts `V_x = (hs+h−1)/2`, `V_p = (h/s+h−1)/2`.
    pub fn from_variances(vx: f64, vp: f64) -> Result<Self> {
        if !(vx > 0.0 && vp > 0.0) {
            return Err(Error::param("variance", "must be positive"));
        }
        let s = (2.0 * vx + 1.0) / (2.0 * vp + 1.0);
        let h = (2.0 * vx + 1.0) / (s + 1.0);
        Self::new(s, h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(Error::param("s", format!("{} (must be in (0, 1])", self.s)));
        }
        if !(self.h >= 1.0 && self.h.is_finite()) {
            return Err(Error::param("h", format!("{} (must be >= 1)", self.h)));
        }
        Ok(())
    }

    pub fn vx(&self) -> f64 {
        (self.h * self.s + self.h - 1.0) / 2.0
    }

    pub fn vp(&self) -> f64 {
        (self.h / self.s + self.h - 1.0) / 2.0
    }

    /// Variance of the quadrature at LO phase `phi`.
    pub fn variance_at(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.vx() * c * c + self.vp() * s * s
    }
}

/// Density operator of the squeezer model: a squeezed thermal state with
/// quadrature variances `(V_x, V_p)`.
pub fn gaussian_model_state(m: &SqueezerModel, cutoff: usize) -> Result<DensityOperator> {
    m.validate()?;
    let (vx, vp) = (m.vx(), m.vp());
    let product = vx * vp;
    if product < 0.25 - 1e-15 {
        return Err(Error::param(
            "model",
            format!("V_x V_p = {product} < 1/4 is unphysical"),
        ));
    }
    let nbar = ((2.0 * product.max(0.25).sqrt()) - 1.0) / 2.0;
    let r = (vp / vx).ln() / 4.0;

    let work = cutoff + SQUEEZE_PAD;
    let sq = padded_squeeze(r, work);
    let q = nbar / (nbar + 1.0);
    let pops: Vec<f64> = (0..=work).map(|n| q.powi(n as i32) / (nbar + 1.0)).collect();
    // ρ = S diag(p) Sᵀ, cropped
    let d = cutoff + 1;
    let mut full = DMatrix::<f64>::zeros(d, d);
    for (k, &pk) in pops.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        let col = sq.column(k);
        for i in 0..d {
            let ci = col[i] * pk;
            if ci == 0.0 {
                continue;
            }
            for j in 0..d {
                full[(i, j)] += ci * col[j];
            }
        }
    }
    let kept: f64 = (0..cutoff.saturating_sub(1)).map(|n| full[(n, n)]).sum();
    let tail = 1.0 - kept;
    if tail >= TRUNCATION_TOL {
        return Err(Error::Truncation { cutoff, weight: tail });
    }
    let m = CMatrix::from_fn(d, d, |i, j| C64::from(full[(i, j)]));
    let (rho, _) = DensityOperator::from_unnormalized(cutoff, 1, m)?;
    Ok(rho)
}

/// Entangled cat-pair probes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BellKind {
    /// `(|+⟩|+⟩ + |−⟩|−⟩)/√2`
    PhiPlus,
    /// `(|+⟩|−⟩ + |−⟩|+⟩)/√2`
    PsiPlus,
    /// `(|+⟩|μ⟩ + e^{iφ}|−⟩|ν⟩)/√2` with `ν` the opposite parity of `μ`.
    General { mu: Parity, phi: f64 },
}

impl BellKind {
    pub fn as_general(self) -> (Parity, f64) {
        match self {
            BellKind::PhiPlus => (Parity::Even, 0.0),
            BellKind::PsiPlus => (Parity::Odd, 0.0),
            BellKind::General { mu, phi } => (mu, phi),
        }
    }

    /// Same probe with `μ` and `ν` exchanged on the second arm.
    pub fn bit_flipped(self) -> Self {
        let (mu, phi) = self.as_general();
        BellKind::General { mu: mu.opposite(), phi }
    }
}

pub fn bell_cat(spec: &CatQubitSpec, kind: BellKind) -> Result<FockKet> {
    let (mu, phi) = kind.as_general();
    let plus = spec.logical(Parity::Even)?;
    let minus = spec.logical(Parity::Odd)?;
    let pick = |p: Parity| if p == Parity::Even { &plus } else { &minus };
    let first = plus.tensor(pick(mu))?;
    let second = minus.tensor(pick(mu.opposite()))?;
    let psi = FockKet::superpose(&[
        (C64::from(FRAC_1_SQRT_2), &first),
        (C64::from_polar(FRAC_1_SQRT_2, phi), &second),
    ])?;
    if psi.norm_sqr() < ZERO_NORM_SQR {
        return Err(Error::ZeroNorm("bell cat".into()));
    }
    psi.normalized()
}

/// Ideal gate output `(I ⊗ a)|Ψ⟩ / ‖(I ⊗ a)|Ψ⟩‖`.
pub fn omega_target(input: &FockKet) -> Result<FockKet> {
    let a = ModeOperator::annihilation(input.cutoff());
    let out = input.apply_on(&a, Mode::B)?;
    if out.norm_sqr() < ZERO_NORM_SQR {
        return Err(Error::ZeroNorm("annihilation of the probe arm".into()));
    }
    out.normalized()
}

/// Single-photon-subtracted squeezed vacuum, `a S|0⟩` normalized.
pub fn squeezed_photon(s: f64, cutoff: usize) -> Result<FockKet> {
    let sv = squeezed_vacuum(s, cutoff)?;
    let out = sv.apply(&ModeOperator::annihilation(cutoff))?;
    if out.norm_sqr() < ZERO_NORM_SQR {
        return Err(Error::ZeroNorm("photon subtraction from vacuum".into()));
    }
    out.normalized()
}
