//! The photon-subtraction gate model.
//!
//! A weakly reflecting beamsplitter (transmissivity `T`, convention
//! `a → √T a + √(1−T) b`, `b → √T b − √(1−T) a`) taps the signal; a click
//! on the reflected mode `b` heralds the gate. In the low detector
//! efficiency limit the click acts as `b̂` on the reflected mode, which is
//! then traced out. Since the ancilla starts in vacuum this reduces to the
//! single-mode form
//!
//! ```text
//! Ẽ_good(ρ) = (1 − T) · L_T(a ρ a†)        Ẽ_bad(ρ) = L_T(ρ)
//! ```
//!
//! where `L_T` is the pure-loss channel. A fraction `ξ` of heralds come
//! from the signal mode; the remaining `1 − ξ` are uncorrelated with it and
//! leave only the beamsplitter loss. Each branch is trace-normalized before
//! mixing. Homodyne inefficiency `η` is modelled as a loss placed before the
//! beamsplitter, with the detector efficiency rescaled to `κ/η`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{apply_on_arm, CMatrix, CVector, DensityOperator, FockKet, Mode, ModeOperator, C64};
use crate::states::DEFAULT_CUTOFF;

/// Below this trace the heralded branch is considered empty.
pub const ANNIHILATION_TOL: f64 = 1e-14;

/// Device parameters of the gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    /// Beamsplitter power transmissivity.
    #[serde(rename = "T")]
    pub transmissivity: f64,
    /// Modal purity: fraction of heralds originating from the signal mode.
    pub xi: f64,
    /// Herald detector efficiency; scales the success rate only.
    pub kappa: f64,
    /// Homodyne efficiency.
    pub eta: f64,
    pub cutoff: usize,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            transmissivity: 0.9,
            xi: 0.83,
            kappa: 1.0,
            eta: 1.0,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

impl GateParams {
    pub fn new(transmissivity: f64, xi: f64) -> Result<Self> {
        let p = Self {
            transmissivity,
            xi,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_transmissivity(mut self, t: f64) -> Self {
        self.transmissivity = t;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transmissivity > 0.0 && self.transmissivity < 1.0) {
            return Err(Error::param(
                "T",
                format!("{} (must be in (0, 1))", self.transmissivity),
            ));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::param("xi", format!("{} (must be in [0, 1])", self.xi)));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::param("kappa", format!("{} (must be in (0, 1])", self.kappa)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::param("eta", format!("{} (must be in (0, 1])", self.eta)));
        }
        if self.kappa / self.eta > 1.0 {
            return Err(Error::param("kappa", "kappa/eta must not exceed 1"));
        }
        if self.cutoff < 2 {
            return Err(Error::param("cutoff", "must be at least 2"));
        }
        Ok(())
    }

    /// Detector efficiency after moving the homodyne loss in front of the
    /// beamsplitter.
    pub fn effective_kappa(&self) -> f64 {
        self.kappa / self.eta
    }
}

/// A trace-normalized channel output with its pre-normalization trace.
#[derive(Clone, Debug)]
pub struct ChannelOutput {
    pub state: DensityOperator,
    /// `Tr Ẽ(ρ)`, proportional to the branch probability.
    pub weight: f64,
}

/// Pure-loss channel with Kraus operators
/// `E_k = Σ_n √C(n,k) T^{(n−k)/2} (1−T)^{k/2} |n−k⟩⟨n|`.
#[derive(Clone, Debug)]
pub struct LossChannel {
    transmission: f64,
    cutoff: usize,
    /// `coeff[k][m] = ⟨m|E_k|m+k⟩`
    coeff: Vec<Vec<f64>>,
}

impl LossChannel {
    pub fn new(transmission: f64, cutoff: usize) -> Result<Self> {
        if !(transmission > 0.0 && transmission <= 1.0) {
            return Err(Error::param(
                "transmission",
                format!("{transmission} (must be in (0, 1])"),
            ));
        }
        let binom = pascal(cutoff);
        let loss = 1.0 - transmission;
        let coeff = (0..=cutoff)
            .map(|k| {
                (0..=cutoff - k)
                    .map(|m| (binom[m + k][k] * transmission.powi(m as i32) * loss.powi(k as i32)).sqrt())
                    .collect()
            })
            .collect();
        Ok(Self {
            transmission,
            cutoff,
            coeff,
        })
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    /// Dense Kraus matrices (zero operators omitted).
    pub fn kraus(&self) -> Vec<CMatrix> {
        let d = self.cutoff + 1;
        self.coeff
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
            .map(|(k, c)| CMatrix::from_fn(d, d, |i, j| if j == i + k { C64::from(c[i]) } else { C64::from(0.0) }))
            .collect()
    }

    /// Applies the channel to an arbitrary (not necessarily Hermitian) operator.
    pub fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        let d = self.cutoff + 1;
        CMatrix::from_fn(d, d, |i, j| {
            let mut acc = C64::from(0.0);
            for (k, c) in self.coeff.iter().enumerate() {
                if i + k > self.cutoff || j + k > self.cutoff {
                    break;
                }
                let w = c[i] * c[j];
                if w != 0.0 {
                    acc += m[(i + k, j + k)] * w;
                }
            }
            acc
        })
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        check_single_mode(rho, self.cutoff)?;
        let (out, _) = DensityOperator::from_unnormalized(self.cutoff, 1, self.apply_matrix(rho.matrix()))?;
        Ok(out)
    }
}

fn pascal(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![1.0; i + 1];
        for j in 1..i {
            row[j] = rows[i - 1][j - 1] + rows[i - 1][j];
        }
        rows.push(row);
    }
    rows
}

fn check_single_mode(rho: &DensityOperator, cutoff: usize) -> Result<()> {
    if rho.modes() != 1 {
        return Err(Error::ModeCount {
            expected: 1,
            got: rho.modes(),
        });
    }
    if rho.cutoff() != cutoff {
        return Err(Error::CutoffMismatch {
            left: rho.cutoff(),
            right: cutoff,
        });
    }
    Ok(())
}

/// Trace-preserving loss with power transmission `transmission ∈ (0, 1]`.
pub fn loss_channel(rho: &DensityOperator, transmission: f64) -> Result<DensityOperator> {
    LossChannel::new(transmission, rho.cutoff())?.apply(rho)
}

fn annihilate(m: &CMatrix, cutoff: usize) -> CMatrix {
    let a = ModeOperator::annihilation(cutoff);
    a.matrix() * m * a.matrix().adjoint()
}

/// Unnormalized heralded-subtraction map `(1−T) L_T(a M a†)`.
pub fn subtract_good_map(m: &CMatrix, transmissivity: f64, cutoff: usize) -> Result<CMatrix> {
    if !(transmissivity > 0.0 && transmissivity < 1.0) {
        return Err(Error::param("T", format!("{transmissivity} (must be in (0, 1))")));
    }
    let loss = LossChannel::new(transmissivity, cutoff)?;
    Ok(loss.apply_matrix(&annihilate(m, cutoff)) * C64::from(1.0 - transmissivity))
}

/// Correct-mode herald branch.
pub fn subtract_good(rho: &DensityOperator, transmissivity: f64) -> Result<ChannelOutput> {
    check_single_mode(rho, rho.cutoff())?;
    let m = subtract_good_map(rho.matrix(), transmissivity, rho.cutoff())?;
    let weight = m.trace().re;
    if weight < ANNIHILATION_TOL {
        return Err(Error::Annihilated(weight));
    }
    let (state, weight) = DensityOperator::from_unnormalized(rho.cutoff(), 1, m)?;
    Ok(ChannelOutput { state, weight })
}

/// Faulty-herald branch: the trigger carries no information on the signal,
/// which only suffers the beamsplitter loss.
pub fn subtract_bad(rho: &DensityOperator, transmissivity: f64) -> Result<ChannelOutput> {
    Ok(ChannelOutput {
        state: loss_channel(rho, transmissivity)?,
        weight: 1.0,
    })
}

/// Single-mode Kraus family of the heralded branch, `√(1−T) E_k a`.
pub fn good_kraus(transmissivity: f64, cutoff: usize) -> Result<Vec<CMatrix>> {
    let a = ModeOperator::annihilation(cutoff);
    let scale = C64::from((1.0 - transmissivity).sqrt());
    Ok(LossChannel::new(transmissivity, cutoff)?
        .kraus()
        .into_iter()
        .map(|e| e * a.matrix() * scale)
        .collect())
}

/// Both normalized branches of the gate for one input.
#[derive(Clone, Debug)]
pub struct GateBranches {
    /// `None` when `ξ = 0` and the heralded branch was not evaluated.
    pub good: Option<ChannelOutput>,
    pub bad: ChannelOutput,
    pub xi: f64,
}

impl GateBranches {
    pub fn mixed(&self) -> Result<DensityOperator> {
        let out = match &self.good {
            Some(g) if self.xi > 0.0 => DensityOperator::mix(&[(self.xi, &g.state), (1.0 - self.xi, &self.bad.state)])?,
            _ => self.bad.state.clone(),
        };
        // re-validate Hermiticity and positivity after mixing
        DensityOperator::from_matrix(out.cutoff(), 1, out.into_matrix())
    }
}

/// Evaluates both branches; the homodyne loss `η` acts first.
pub fn gate_branches(rho: &DensityOperator, p: &GateParams) -> Result<GateBranches> {
    p.validate()?;
    check_single_mode(rho, p.cutoff)?;
    let input = if p.eta < 1.0 {
        loss_channel(rho, p.eta)?
    } else {
        rho.clone()
    };
    let good = if p.xi > 0.0 {
        Some(subtract_good(&input, p.transmissivity)?)
    } else {
        None
    };
    let bad = subtract_bad(&input, p.transmissivity)?;
    Ok(GateBranches { good, bad, xi: p.xi })
}

/// `ξ Ẽ_good(ρ)/Tr + (1−ξ) Ẽ_bad(ρ)`.
pub fn gate(rho: &DensityOperator, p: &GateParams) -> Result<DensityOperator> {
    gate_branches(rho, p)?.mixed()
}

/// Relative herald rate `(κ/η) Tr Ẽ_good(ρ)`.
pub fn success_probability(rho: &DensityOperator, p: &GateParams) -> Result<f64> {
    p.validate()?;
    check_single_mode(rho, p.cutoff)?;
    let input = if p.eta < 1.0 {
        loss_channel(rho, p.eta)?
    } else {
        rho.clone()
    };
    let m = subtract_good_map(input.matrix(), p.transmissivity, p.cutoff)?;
    Ok(p.effective_kappa() * m.trace().re.max(0.0))
}

/// Two gates in sequence (squeezed vacuum → squeezed photon → second subtraction).
pub fn double_subtraction(rho0: &DensityOperator, p0: &GateParams, p1: &GateParams) -> Result<DensityOperator> {
    let rho1 = gate(rho0, p0)?;
    gate(&rho1, p1)
}

/// Unnormalized branch ensembles `{(I ⊗ K)|ψ⟩}` for the arm channel.
fn arm_ensemble(
    psi: &CVector,
    cutoff: usize,
    p: &GateParams,
    arm: Mode,
    heralded: bool,
) -> Result<Vec<(f64, CVector)>> {
    let pre: Vec<CMatrix> = if p.eta < 1.0 {
        LossChannel::new(p.eta, cutoff)?.kraus()
    } else {
        vec![CMatrix::identity(cutoff + 1, cutoff + 1)]
    };
    let post: Vec<CMatrix> = if heralded {
        good_kraus(p.transmissivity, cutoff)?
    } else {
        LossChannel::new(p.transmissivity, cutoff)?.kraus()
    };
    let mut out = Vec::with_capacity(pre.len() * post.len());
    for e in &pre {
        let v = apply_on_arm(psi, cutoff, e, arm);
        for k in &post {
            out.push((1.0, apply_on_arm(&v, cutoff, k, arm)));
        }
    }
    Ok(out)
}

/// Output of the gate acting on one arm of a two-mode pure state, with the
/// other arm untouched: `(I ⊗ 𝓔)(|Ψ⟩⟨Ψ|)`.
pub fn gate_on_arm(psi: &FockKet, p: &GateParams, arm: Mode) -> Result<DensityOperator> {
    let (good, bad) = arm_branches(psi, p, arm)?;
    match good {
        Some(g) if p.xi > 0.0 => DensityOperator::mix(&[(p.xi, &g.state), (1.0 - p.xi, &bad.state)]),
        _ => Ok(bad.state),
    }
}

/// Normalized heralded and faulty branches of [`gate_on_arm`].
pub fn arm_branches(psi: &FockKet, p: &GateParams, arm: Mode) -> Result<(Option<ChannelOutput>, ChannelOutput)> {
    p.validate()?;
    if psi.modes() != 2 {
        return Err(Error::ModeCount {
            expected: 2,
            got: psi.modes(),
        });
    }
    if !psi.is_normalized() {
        return Err(Error::NotNormalized(psi.norm_sqr()));
    }
    let cutoff = psi.cutoff();
    let good = if p.xi > 0.0 {
        let members = arm_ensemble(psi.amplitudes(), cutoff, p, arm, true)?;
        let (state, weight) = DensityOperator::from_ensemble(cutoff, 2, &members)?;
        if weight < ANNIHILATION_TOL {
            return Err(Error::Annihilated(weight));
        }
        Some(ChannelOutput { state, weight })
    } else {
        None
    };
    let members = arm_ensemble(psi.amplitudes(), cutoff, p, arm, false)?;
    let (state, weight) = DensityOperator::from_ensemble(cutoff, 2, &members)?;
    Ok((good, ChannelOutput { state, weight }))
}

/// Explicit two-mode beamsplitter simulation of the gate branches, used as
/// an independent check on the single-mode Kraus forms.
pub mod oracle {
    use nalgebra::DMatrix;

    use super::*;
    use crate::fock::partial_trace_matrix;

    /// Sign convention of the beamsplitter mixing.
    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum Convention {
        /// `a → √T a + √(1−T) b`, `b → √T b − √(1−T) a`
        Standard,
        /// `a → √T a − √(1−T) b`, `b → √T b + √(1−T) a`
        Mirrored,
    }

    /// Two-mode beamsplitter unitary `exp(θ(a†b − ab†))`, `cos θ = √T`.
    ///
    /// Exact on every total-photon-number block that fits inside the
    /// truncated product space, which covers all inputs of the form
    /// `ρ ⊗ |0⟩⟨0|`.
    pub fn beamsplitter(cutoff: usize, transmissivity: f64, convention: Convention) -> CMatrix {
        let d = cutoff + 1;
        let mut theta = transmissivity.sqrt().acos();
        if convention == Convention::Mirrored {
            theta = -theta;
        }
        let idx = |i: usize, j: usize| i * d + j;
        let mut g = DMatrix::<f64>::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                // a†b |i, j⟩ = √((i+1) j) |i+1, j−1⟩
                if i + 1 < d && j >= 1 {
                    let v = (((i + 1) * j) as f64).sqrt() * theta;
                    g[(idx(i + 1, j - 1), idx(i, j))] += v;
                    g[(idx(i, j), idx(i + 1, j - 1))] -= v;
                }
            }
        }
        g.exp().map(C64::from)
    }

    fn embed_with_vacuum_ancilla(rho: &DensityOperator) -> CMatrix {
        let d = rho.cutoff() + 1;
        let mut vac = CMatrix::zeros(d, d);
        vac[(0, 0)] = C64::from(1.0);
        rho.matrix().kronecker(&vac)
    }

    /// `Tr_B[ b U (ρ ⊗ |0⟩⟨0|) U† b† ]`, unnormalized.
    pub fn heralded(rho: &DensityOperator, transmissivity: f64, convention: Convention) -> CMatrix {
        let cutoff = rho.cutoff();
        let u = beamsplitter(cutoff, transmissivity, convention);
        let b = ModeOperator::annihilation(cutoff)
            .on_mode(Mode::B)
            .expect("single-mode operator");
        let out = &u * embed_with_vacuum_ancilla(rho) * u.adjoint();
        let clicked = b.matrix() * out * b.matrix().adjoint();
        partial_trace_matrix(&clicked, cutoff, Mode::B)
    }

    /// `Tr_B[ U (ρ ⊗ |0⟩⟨0|) U† ]`.
    pub fn lossy(rho: &DensityOperator, transmissivity: f64, convention: Convention) -> CMatrix {
        let cutoff = rho.cutoff();
        let u = beamsplitter(cutoff, transmissivity, convention);
        let out = &u * embed_with_vacuum_ancilla(rho) * u.adjoint();
        partial_trace_matrix(&out, cutoff, Mode::B)
    }

    /// Full gate through the two-mode route (η = 1).
    pub fn gate(rho: &DensityOperator, p: &GateParams, convention: Convention) -> Result<DensityOperator> {
        p.validate()?;
        let bad = lossy(rho, p.transmissivity, convention);
        let mut m = bad * C64::from(1.0 - p.xi);
        if p.xi > 0.0 {
            let good = heralded(rho, p.transmissivity, convention);
            let tr = good.trace().re;
            if tr < ANNIHILATION_TOL {
                return Err(Error::Annihilated(tr));
            }
            m += good * C64::from(p.xi / tr);
        }
        DensityOperator::from_matrix(rho.cutoff(), 1, m)
    }
}
