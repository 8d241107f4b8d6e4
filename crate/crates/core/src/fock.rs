//! Truncated Fock-space linear algebra.
//!
//! Every object carries a per-mode photon-number `cutoff` N (basis
//! `|0⟩..|N⟩`) and a mode count (1 or 2). Two-mode objects use the
//! Kronecker ordering `index = n_a * (N + 1) + n_b`.
//!
//! Quadratures follow `x = (a + a†)/√2`, so the vacuum has variance 1/2 and
//! Wigner function `W(x, p) = e^{-x²-p²}/π`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance for a ket or density operator to count as normalized.
pub const NORM_TOL: f64 = 1e-12;
/// Trace tolerance for density operators.
pub const TRACE_TOL: f64 = 1e-10;
/// Elementwise Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues in `[-PSD_TOL, 0)` are float noise and get clipped.
pub const PSD_TOL: f64 = 1e-9;
/// Maximum weight allowed in the top two Fock levels of a constructed state.
pub const TRUNCATION_TOL: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Selects one mode of a two-mode object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
}

fn check_modes(modes: usize) -> Result<()> {
    if modes == 1 || modes == 2 {
        Ok(())
    } else {
        Err(Error::param("modes", format!("{modes} (only 1 or 2 supported)")))
    }
}

fn dim_for(cutoff: usize, modes: usize) -> usize {
    (cutoff + 1).pow(modes as u32)
}

fn tail_weight_of<F: Fn(usize) -> f64>(cutoff: usize, modes: usize, weight: F) -> f64 {
    let d = cutoff + 1;
    let edge = cutoff.saturating_sub(1);
    (0..dim_for(cutoff, modes))
        .filter(|&i| {
            if modes == 1 {
                i >= edge
            } else {
                i / d >= edge || i % d >= edge
            }
        })
        .map(weight)
        .sum()
}

/// A (possibly unnormalized) state vector on one or two truncated modes.
#[derive(Clone, Debug, PartialEq)]
pub struct FockKet {
    cutoff: usize,
    modes: usize,
    amps: CVector,
}

impl FockKet {
    /// Single-mode ket from amplitudes `c_0..c_N`.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::param("cutoff", "must be at least 1"));
        }
        Ok(Self {
            cutoff: amps.len() - 1,
            modes: 1,
            amps: CVector::from_vec(amps),
        })
    }

    pub fn from_vector(cutoff: usize, modes: usize, amps: CVector) -> Result<Self> {
        check_modes(modes)?;
        if cutoff < 1 {
            return Err(Error::param("cutoff", "must be at least 1"));
        }
        let expected = dim_for(cutoff, modes);
        if amps.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: amps.len(),
            });
        }
        Ok(Self { cutoff, modes, amps })
    }

    /// Fock basis state `|n⟩`.
    pub fn basis(cutoff: usize, n: usize) -> Result<Self> {
        if n > cutoff {
            return Err(Error::param("n", format!("{n} exceeds cutoff {cutoff}")));
        }
        let mut amps = CVector::zeros(cutoff + 1);
        amps[n] = ONE;
        Self::from_vector(cutoff, 1, amps)
    }

    pub fn vacuum(cutoff: usize) -> Result<Self> {
        Self::basis(cutoff, 0)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    /// Amplitude of `|n_a, n_b⟩` on a two-mode ket.
    pub fn amplitude2(&self, n_a: usize, n_b: usize) -> C64 {
        self.amps[n_a * (self.cutoff + 1) + n_b]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if !(n2 > 1e-300) {
            return Err(Error::ZeroNorm(format!("norm^2 = {n2:.3e}")));
        }
        Ok(self.scaled(C64::from(1.0 / n2.sqrt())))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            cutoff: self.cutoff,
            modes: self.modes,
            amps: &self.amps * factor,
        }
    }

    /// `Σ_i w_i |k_i⟩`; all kets must share cutoff and mode count.
    pub fn superpose(terms: &[(C64, &FockKet)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::EmptyData("no terms to superpose".into()))?;
        let mut amps = CVector::zeros(first.dim());
        for (w, k) in terms {
            first.same_space(k)?;
            amps.axpy(*w, &k.amps, ONE);
        }
        Self::from_vector(first.cutoff, first.modes, amps)
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.cutoff != other.cutoff {
            return Err(Error::CutoffMismatch {
                left: self.cutoff,
                right: other.cutoff,
            });
        }
        if self.modes != other.modes {
            return Err(Error::ModeCount {
                expected: self.modes,
                got: other.modes,
            });
        }
        Ok(())
    }

    /// `⟨self|other⟩`; both kets must be normalized.
    pub fn overlap(&self, other: &Self) -> Result<C64> {
        self.same_space(other)?;
        for k in [self, other] {
            if !k.is_normalized() {
                return Err(Error::NotNormalized(k.norm_sqr()));
            }
        }
        Ok(self.inner(other))
    }

    /// Raw inner product `⟨self|other⟩` without normalization checks.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// Weight in the top two Fock levels of any mode.
    pub fn tail_weight(&self) -> f64 {
        tail_weight_of(self.cutoff, self.modes, |i| self.amps[i].norm_sqr()) / self.norm_sqr()
    }

    /// Fails when the cutoff cannot represent the state faithfully.
    pub fn check_truncation(&self) -> Result<()> {
        let weight = self.tail_weight();
        if weight < TRUNCATION_TOL {
            Ok(())
        } else {
            Err(Error::Truncation {
                cutoff: self.cutoff,
                weight,
            })
        }
    }

    /// Applies a single-mode operator to a single-mode ket.
    pub fn apply(&self, op: &ModeOperator) -> Result<Self> {
        if self.modes != op.modes {
            return Err(Error::ModeCount {
                expected: op.modes,
                got: self.modes,
            });
        }
        if self.cutoff != op.cutoff {
            return Err(Error::CutoffMismatch {
                left: self.cutoff,
                right: op.cutoff,
            });
        }
        Self::from_vector(self.cutoff, self.modes, &op.matrix * &self.amps)
    }

    /// Applies a single-mode operator to one arm of a two-mode ket.
    pub fn apply_on(&self, op: &ModeOperator, mode: Mode) -> Result<Self> {
        if self.modes != 2 {
            return Err(Error::ModeCount {
                expected: 2,
                got: self.modes,
            });
        }
        if op.modes != 1 || op.cutoff != self.cutoff {
            return Err(Error::CutoffMismatch {
                left: self.cutoff,
                right: op.cutoff,
            });
        }
        Ok(Self {
            cutoff: self.cutoff,
            modes: 2,
            amps: apply_on_arm(&self.amps, self.cutoff, op.matrix(), mode),
        })
    }

    /// Embeds a single-mode ket into a larger cutoff (zero padded).
    pub fn embed(&self, cutoff: usize) -> Result<Self> {
        if self.modes != 1 {
            return Err(Error::ModeCount {
                expected: 1,
                got: self.modes,
            });
        }
        if cutoff < self.cutoff {
            return Err(Error::param("cutoff", "embedding cannot shrink the space"));
        }
        let mut amps = CVector::zeros(cutoff + 1);
        amps.rows_mut(0, self.dim()).copy_from(&self.amps);
        Self::from_vector(cutoff, 1, amps)
    }

    /// Phase-space rotation `e^{iϑn}` of a single-mode ket; maps `|α⟩` to `|αe^{iϑ}⟩`.
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        if self.modes != 1 {
            return Err(Error::ModeCount {
                expected: 1,
                got: self.modes,
            });
        }
        let amps = CVector::from_fn(self.dim(), |n, _| self.amps[n] * C64::from_polar(1.0, angle * n as f64));
        Self::from_vector(self.cutoff, 1, amps)
    }

    /// Photon-number expectation (single mode).
    pub fn mean_photon_number(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum::<f64>()
            / self.norm_sqr()
    }

    pub fn to_json_value(&self) -> KetJson {
        KetJson {
            cutoff: self.cutoff,
            re: self.amps.iter().map(|c| c.re).collect(),
            im: self.amps.iter().map(|c| c.im).collect(),
        }
    }

    pub fn from_json_value(j: &KetJson) -> Result<Self> {
        if j.re.len() != j.im.len() {
            return Err(Error::DimensionMismatch {
                expected: j.re.len(),
                got: j.im.len(),
            });
        }
        let d = j.cutoff + 1;
        let modes = if j.re.len() == d {
            1
        } else if j.re.len() == d * d {
            2
        } else {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: j.re.len(),
            });
        };
        let amps = j.re.iter().zip(&j.im).map(|(&r, &i)| C64::new(r, i));
        Self::from_vector(j.cutoff, modes, CVector::from_iterator(j.re.len(), amps))
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.to_json_value())?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Self::from_json_value(&serde_json::from_reader(r)?)
    }
}

/// `(I ⊗ op)ψ` or `(op ⊗ I)ψ` on a two-mode amplitude vector.
pub(crate) fn apply_on_arm(amps: &CVector, cutoff: usize, op: &CMatrix, mode: Mode) -> CVector {
    let d = cutoff + 1;
    // column-major view: psi[(n_b, n_a)] = amps[n_a * d + n_b]
    let psi = DMatrix::from_column_slice(d, d, amps.as_slice());
    let out = match mode {
        Mode::B => op * psi,
        Mode::A => psi * op.transpose(),
    };
    CVector::from_column_slice(out.as_slice())
}

/// Serialized ket: `{"cutoff": N, "re": [...], "im": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KetJson {
    pub cutoff: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// A general linear operator on the truncated space (not necessarily
/// Hermitian), e.g. `a`, `a†`, or the unnormalized channel images of
/// off-diagonal dyads.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    cutoff: usize,
    modes: usize,
    matrix: CMatrix,
}

impl ModeOperator {
    pub fn from_matrix(cutoff: usize, modes: usize, matrix: CMatrix) -> Result<Self> {
        check_modes(modes)?;
        let d = dim_for(cutoff, modes);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { cutoff, modes, matrix })
    }

    /// `a|n⟩ = √n |n-1⟩`.
    pub fn annihilation(cutoff: usize) -> Self {
        let d = cutoff + 1;
        let matrix = CMatrix::from_fn(
            d,
            d,
            |i, j| {
                if j == i + 1 {
                    C64::from((j as f64).sqrt())
                } else {
                    ZERO
                }
            },
        );
        Self {
            cutoff,
            modes: 1,
            matrix,
        }
    }

    pub fn creation(cutoff: usize) -> Self {
        Self::annihilation(cutoff).adjoint()
    }

    pub fn number(cutoff: usize) -> Self {
        let d = cutoff + 1;
        Self {
            cutoff,
            modes: 1,
            matrix: CMatrix::from_fn(d, d, |i, j| if i == j { C64::from(i as f64) } else { ZERO }),
        }
    }

    pub fn identity(cutoff: usize, modes: usize) -> Self {
        let d = dim_for(cutoff, modes);
        Self {
            cutoff,
            modes,
            matrix: CMatrix::identity(d, d),
        }
    }

    /// Lifts a single-mode operator onto one arm of a two-mode space.
    pub fn on_mode(&self, mode: Mode) -> Result<Self> {
        if self.modes != 1 {
            return Err(Error::ModeCount {
                expected: 1,
                got: self.modes,
            });
        }
        let id = CMatrix::identity(self.cutoff + 1, self.cutoff + 1);
        let matrix = match mode {
            Mode::A => self.matrix.kronecker(&id),
            Mode::B => id.kronecker(&self.matrix),
        };
        Ok(Self {
            cutoff: self.cutoff,
            modes: 2,
            matrix,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            cutoff: self.cutoff,
            modes: self.modes,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `⟨k|self|k⟩`.
    pub fn expectation(&self, ket: &FockKet) -> C64 {
        ket.amps.dotc(&(&self.matrix * &ket.amps))
    }
}

/// A normalized, Hermitian, positive semidefinite density operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    cutoff: usize,
    modes: usize,
    matrix: CMatrix,
}

fn max_antihermitian(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl DensityOperator {
    /// Validates a candidate density matrix: Hermitian, unit trace, and
    /// positive semidefinite up to [`PSD_TOL`]. Small negative eigenvalues
    /// are clipped and the result renormalized.
    pub fn from_matrix(cutoff: usize, modes: usize, matrix: CMatrix) -> Result<Self> {
        let op = ModeOperator::from_matrix(cutoff, modes, matrix)?;
        let mut m = op.matrix;
        let dev = max_antihermitian(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = m.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized(tr));
        }
        m = (&m + m.adjoint()) * C64::from(0.5);
        let eig = SymmetricEigen::new(m.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        if min < 0.0 {
            let clipped = eig.eigenvalues.map(|v| v.max(0.0));
            let total: f64 = clipped.iter().sum();
            let vals = CMatrix::from_diagonal(&clipped.map(|v| C64::from(v / total)));
            m = &eig.eigenvectors * vals * eig.eigenvectors.adjoint();
        }
        Ok(Self {
            cutoff,
            modes,
            matrix: m,
        })
    }

    /// Normalizes a positive operator by its trace, returning the state and
    /// the original trace.
    pub fn from_unnormalized(cutoff: usize, modes: usize, matrix: CMatrix) -> Result<(Self, f64)> {
        let tr = matrix.trace().re;
        if !(tr > 0.0) {
            return Err(Error::Annihilated(tr));
        }
        let rho = Self::from_matrix(cutoff, modes, matrix / C64::from(tr))?;
        Ok((rho, tr))
    }

    /// Structurally PSD matrices (products, partial traces, mixtures of
    /// valid states). Hermiticity is enforced by symmetrization.
    pub(crate) fn from_trusted(cutoff: usize, modes: usize, matrix: CMatrix) -> Self {
        let m = (&matrix + matrix.adjoint()) * C64::from(0.5);
        let tr = m.trace().re;
        Self {
            cutoff,
            modes,
            matrix: m / C64::from(tr),
        }
    }

    /// `|ψ⟩⟨ψ|` for a normalized ket.
    pub fn pure(ket: &FockKet) -> Result<Self> {
        if !ket.is_normalized() {
            return Err(Error::NotNormalized(ket.norm_sqr()));
        }
        Ok(Self {
            cutoff: ket.cutoff,
            modes: ket.modes,
            matrix: &ket.amps * ket.amps.adjoint(),
        })
    }

    /// `Σ w_i |ψ_i⟩⟨ψ_i| / Σ w_i ‖ψ_i‖²` with positivity checked through the
    /// Gram matrix of the ensemble, which shares its nonzero spectrum with
    /// the full operator but is much smaller.
    pub fn from_ensemble(cutoff: usize, modes: usize, members: &[(f64, CVector)]) -> Result<(Self, f64)> {
        check_modes(modes)?;
        let d = dim_for(cutoff, modes);
        if let Some(w) = members.iter().find(|(w, _)| *w < 0.0) {
            return Err(Error::param("weight", format!("negative ensemble weight {}", w.0)));
        }
        let kept: Vec<(f64, &CVector)> = members
            .iter()
            .filter(|(w, v)| *w > 0.0 && v.norm_squared() > 0.0)
            .map(|(w, v)| (*w, v))
            .collect();
        let total: f64 = kept.iter().map(|(w, v)| w * v.norm_squared()).sum();
        if !(total > 0.0) {
            return Err(Error::Annihilated(total));
        }
        let mut m = CMatrix::zeros(d, d);
        for (w, v) in &kept {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            m.gerc(C64::from(*w / total), v, v, ONE);
        }
        let k = kept.len();
        let gram = CMatrix::from_fn(k, k, |i, j| {
            C64::from((kept[i].0 * kept[j].0).sqrt() / total) * kept[i].1.dotc(kept[j].1)
        });
        let min = SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        let rho = Self::from_trusted(cutoff, modes, m);
        let dev = max_antihermitian(&rho.matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok((rho, total))
    }

    /// Thermal state with mean photon number `nbar`.
    pub fn thermal(nbar: f64, cutoff: usize) -> Result<Self> {
        if !(nbar >= 0.0) {
            return Err(Error::param("nbar", "must be non-negative"));
        }
        let d = cutoff + 1;
        let q = nbar / (nbar + 1.0);
        let diag: Vec<f64> = (0..d).map(|n| q.powi(n as i32) / (nbar + 1.0)).collect();
        let sum: f64 = diag.iter().sum();
        let m = CMatrix::from_diagonal(&CVector::from_iterator(d, diag.iter().map(|p| C64::from(p / sum))));
        let rho = Self::from_trusted(cutoff, 1, m);
        rho.check_truncation()?;
        Ok(rho)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .cloned()
            .collect()
    }

    /// `Tr(ρ O)`.
    pub fn expectation(&self, op: &ModeOperator) -> C64 {
        (&self.matrix * &op.matrix).trace()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.matrix[(n, n)].re).sum()
    }

    pub fn tail_weight(&self) -> f64 {
        tail_weight_of(self.cutoff, self.modes, |i| self.matrix[(i, i)].re)
    }

    pub fn check_truncation(&self) -> Result<()> {
        let weight = self.tail_weight();
        if weight < TRUNCATION_TOL {
            Ok(())
        } else {
            Err(Error::Truncation {
                cutoff: self.cutoff,
                weight,
            })
        }
    }

    /// Embeds a single-mode state into a larger cutoff (zero padded).
    pub fn embed(&self, cutoff: usize) -> Result<Self> {
        if self.modes != 1 {
            return Err(Error::ModeCount {
                expected: 1,
                got: self.modes,
            });
        }
        if cutoff < self.cutoff {
            return Err(Error::param("cutoff", "embedding cannot shrink the space"));
        }
        let mut m = CMatrix::zeros(cutoff + 1, cutoff + 1);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.matrix);
        Ok(Self {
            cutoff,
            modes: 1,
            matrix: m,
        })
    }

    /// Phase-space rotation `e^{iϑn} ρ e^{-iϑn}` of a single-mode state.
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        if self.modes != 1 {
            return Err(Error::ModeCount {
                expected: 1,
                got: self.modes,
            });
        }
        let d = self.dim();
        let matrix = CMatrix::from_fn(d, d, |m, n| {
            self.matrix[(m, n)] * C64::from_polar(1.0, angle * (m as f64 - n as f64))
        });
        Ok(Self {
            cutoff: self.cutoff,
            modes: 1,
            matrix,
        })
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized pure target, clamped to `[0, 1]`.
    pub fn fidelity_pure(&self, target: &FockKet) -> Result<f64> {
        fidelity_pure(self, target)
    }

    /// Convex combination `Σ p_i ρ_i`; weights must be non-negative and sum to one.
    pub fn mix(terms: &[(f64, &DensityOperator)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::EmptyData("no states to mix".into()))?;
        let total: f64 = terms.iter().map(|(p, _)| p).sum();
        if terms.iter().any(|(p, _)| *p < 0.0) || (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::param(
                "weights",
                format!("must be a probability vector (sum {total})"),
            ));
        }
        let mut m = CMatrix::zeros(first.dim(), first.dim());
        for (p, rho) in terms {
            if rho.cutoff != first.cutoff || rho.modes != first.modes {
                return Err(Error::CutoffMismatch {
                    left: first.cutoff,
                    right: rho.cutoff,
                });
            }
            m += &rho.matrix * C64::from(*p);
        }
        Ok(Self {
            cutoff: first.cutoff,
            modes: first.modes,
            matrix: m,
        })
    }

    pub fn to_json_value(&self) -> DensityJson {
        let d = self.dim();
        DensityJson {
            cutoff: self.cutoff,
            re: (0..d)
                .map(|i| (0..d).map(|j| self.matrix[(i, j)].re).collect())
                .collect(),
            im: (0..d)
                .map(|i| (0..d).map(|j| self.matrix[(i, j)].im).collect())
                .collect(),
        }
    }

    pub fn from_json_value(j: &DensityJson) -> Result<Self> {
        let n = j.re.len();
        let d = j.cutoff + 1;
        let modes = if n == d {
            1
        } else if n == d * d {
            2
        } else {
            return Err(Error::DimensionMismatch { expected: d, got: n });
        };
        if j.im.len() != n || j.re.iter().chain(&j.im).any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: j.im.len(),
            });
        }
        let m = CMatrix::from_fn(n, n, |r, c| C64::new(j.re[r][c], j.im[r][c]));
        Self::from_matrix(j.cutoff, modes, m)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.to_json_value())?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Self::from_json_value(&serde_json::from_reader(r)?)
    }
}

/// Serialized density operator: `{"cutoff": N, "re": [[...]], "im": [[...]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityJson {
    pub cutoff: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// Tensor product of two single-mode objects.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

fn check_tensor_args(c1: usize, m1: usize, c2: usize, m2: usize) -> Result<()> {
    if c1 != c2 {
        return Err(Error::CutoffMismatch { left: c1, right: c2 });
    }
    if m1 != 1 || m2 != 1 {
        return Err(Error::ModeCount {
            expected: 1,
            got: m1.max(m2),
        });
    }
    Ok(())
}

impl Tensor for FockKet {
    fn tensor(&self, other: &Self) -> Result<Self> {
        check_tensor_args(self.cutoff, self.modes, other.cutoff, other.modes)?;
        Ok(Self {
            cutoff: self.cutoff,
            modes: 2,
            amps: self.amps.kronecker(&other.amps),
        })
    }
}

impl Tensor for DensityOperator {
    fn tensor(&self, other: &Self) -> Result<Self> {
        check_tensor_args(self.cutoff, self.modes, other.cutoff, other.modes)?;
        Ok(Self {
            cutoff: self.cutoff,
            modes: 2,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> Result<T> {
    a.tensor(b)
}

/// Traces out `mode` from a two-mode operator matrix.
pub(crate) fn partial_trace_matrix(m: &CMatrix, cutoff: usize, mode: Mode) -> CMatrix {
    let d = cutoff + 1;
    match mode {
        Mode::B => CMatrix::from_fn(d, d, |i, j| (0..d).map(|k| m[(i * d + k, j * d + k)]).sum()),
        Mode::A => CMatrix::from_fn(d, d, |i, j| (0..d).map(|k| m[(k * d + i, k * d + j)]).sum()),
    }
}

/// Traces out `mode` of a two-mode density operator, returning the state of
/// the remaining mode.
pub fn partial_trace(rho: &DensityOperator, mode: Mode) -> Result<DensityOperator> {
    if rho.modes != 2 {
        return Err(Error::ModeCount {
            expected: 2,
            got: rho.modes,
        });
    }
    let m = partial_trace_matrix(&rho.matrix, rho.cutoff, mode);
    Ok(DensityOperator {
        cutoff: rho.cutoff,
        modes: 1,
        matrix: m,
    })
}

/// Fidelity `⟨ψ|ρ|ψ⟩` with a pure, normalized target.
pub fn fidelity_pure(rho: &DensityOperator, target: &FockKet) -> Result<f64> {
    if !target.is_normalized() {
        return Err(Error::NotNormalized(target.norm_sqr()));
    }
    if (rho.trace() - 1.0).abs() > TRACE_TOL {
        return Err(Error::NotNormalized(rho.trace()));
    }
    if rho.cutoff != target.cutoff || rho.modes != target.modes {
        return Err(Error::CutoffMismatch {
            left: rho.cutoff,
            right: target.cutoff,
        });
    }
    let f = target.amps.dotc(&(&rho.matrix * &target.amps)).re;
    if !(-PSD_TOL..=1.0 + PSD_TOL).contains(&f) {
        return Err(Error::NotPositive(f));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// `⟨a|b⟩` between normalized kets.
pub fn overlap(a: &FockKet, b: &FockKet) -> Result<C64> {
    a.overlap(b)
}

/// Rectangular phase-space sampling grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl GridSpec {
    pub fn symmetric(half_width: f64, n: usize) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            nx: n,
            p_min: -half_width,
            p_max: half_width,
            np: n,
        }
    }

    fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![min];
        }
        (0..n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect()
    }
}

/// Wigner function sampled on a grid; `values[(i, j)] = W(xs[i], ps[j])`.
#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    /// Trapezoidal `∬ W dx dp`.
    pub fn integral(&self) -> f64 {
        let wx = trapezoid_weights(&self.xs);
        let wp = trapezoid_weights(&self.ps);
        let mut total = 0.0;
        for (i, a) in wx.iter().enumerate() {
            for (j, b) in wp.iter().enumerate() {
                total += a * b * self.values[(i, j)];
            }
        }
        total
    }

    /// Marginal over `p`, sampled at `xs`.
    pub fn x_marginal(&self) -> Vec<f64> {
        let wp = trapezoid_weights(&self.ps);
        (0..self.xs.len())
            .map(|i| wp.iter().enumerate().map(|(j, w)| w * self.values[(i, j)]).sum())
            .collect()
    }

    /// Marginal over `x`, sampled at `ps`.
    pub fn p_marginal(&self) -> Vec<f64> {
        let wx = trapezoid_weights(&self.xs);
        (0..self.ps.len())
            .map(|j| wx.iter().enumerate().map(|(i, w)| w * self.values[(i, j)]).sum())
            .collect()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// CSV with header `x,p,w`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "p", "w"])?;
        for (i, x) in self.xs.iter().enumerate() {
            for (j, p) in self.ps.iter().enumerate() {
                wtr.write_record([x.to_string(), p.to_string(), self.values[(i, j)].to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Wigner function at a single phase-space point.
///
/// Uses the stable three-term recursion over the Laguerre-type functions
/// `W_{mn}(x, p)` of the dyads `|m⟩⟨n|`, summing `ρ_{mn} W_{mn}` in one pass.
pub fn wigner_at(rho: &DensityOperator, x: f64, p: f64) -> f64 {
    let m = rho.dim();
    let a = C64::new(x, p) / std::f64::consts::SQRT_2;
    let a2 = a * 2.0;
    let mut w = vec![ZERO; m];
    w[0] = C64::from((-2.0 * a.norm_sqr()).exp() / std::f64::consts::PI);
    let rho_m = &rho.matrix;
    let mut total = rho_m[(0, 0)].re * w[0].re;
    for n in 1..m {
        w[n] = a2 * w[n - 1] / (n as f64).sqrt();
        total += 2.0 * (rho_m[(0, n)] * w[n]).re;
    }
    for row in 1..m {
        let mut temp = w[row];
        w[row] = (a2.conj() * temp - (row as f64).sqrt() * w[row - 1]) / (row as f64).sqrt();
        total += (rho_m[(row, row)] * w[row]).re;
        for n in row + 1..m {
            let next = (a2 * w[n - 1] - (row as f64).sqrt() * temp) / (n as f64).sqrt();
            temp = w[n];
            w[n] = next;
            total += 2.0 * (rho_m[(row, n)] * w[n]).re;
        }
    }
    total
}

/// Wigner function of a single-mode state on a grid.
pub fn wigner(rho: &DensityOperator, spec: &GridSpec) -> Result<WignerGrid> {
    if rho.modes != 1 {
        return Err(Error::ModeCount {
            expected: 1,
            got: rho.modes,
        });
    }
    if spec.nx == 0 || spec.np == 0 {
        return Err(Error::param("grid", "needs at least one point per axis"));
    }
    let xs = GridSpec::axis(spec.x_min, spec.x_max, spec.nx);
    let ps = GridSpec::axis(spec.p_min, spec.p_max, spec.np);
    let values = DMatrix::from_fn(xs.len(), ps.len(), |i, j| wigner_at(rho, xs[i], ps[j]));
    Ok(WignerGrid { xs, ps, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn ensemble_of_complex_kets_matches_pure_states() {
        let k = FockKet::new(vec![
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.48),
            C64::new(-0.3, 0.4),
            C64::new(0.0, 0.0),
        ])
        .unwrap()
        .normalized()
        .unwrap();
        let j = FockKet::basis(3, 1).unwrap().rotated(0.9).unwrap();
        let (rho, total) =
            DensityOperator::from_ensemble(3, 1, &[(0.25, k.amplitudes().clone()), (0.75, j.amplitudes().clone())])
                .unwrap();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let pure_k = DensityOperator::pure(&k).unwrap();
        let pure_j = DensityOperator::pure(&j).unwrap();
        let expect = DensityOperator::mix(&[(0.25, &pure_k), (0.75, &pure_j)]).unwrap();
        assert!((rho.matrix() - expect.matrix()).norm() < 1e-14);
    }

    fn basis_rho(cutoff: usize, n: usize) -> DensityOperator {
        DensityOperator::pure(&FockKet::basis(cutoff, n).unwrap()).unwrap()
    }

    #[test]
    fn annihilation_matrix_elements() {
        let a = ModeOperator::annihilation(6);
        for n in 1..=6 {
            let out = FockKet::basis(6, n).unwrap().apply(&a).unwrap();
            assert_eq!(out.amplitudes()[n - 1], C64::from((n as f64).sqrt()));
            assert_abs_diff_eq!(out.norm_sqr(), n as f64, epsilon = 1e-14);
        }
        assert_eq!(FockKet::vacuum(6).unwrap().apply(&a).unwrap().norm_sqr(), 0.0);
    }

    #[test]
    fn vacuum_tensor_vacuum() {
        let v = FockKet::vacuum(4).unwrap();
        let vv = tensor(&v, &v).unwrap();
        assert_eq!(vv.modes(), 2);
        assert_eq!(vv.dim(), 25);
        assert_eq!(vv.amplitude2(0, 0), ONE);
        assert_eq!(vv.norm_sqr(), 1.0);
    }

    #[test]
    fn tensor_cutoff_mismatch() {
        let a = FockKet::vacuum(4).unwrap();
        let b = FockKet::vacuum(5).unwrap();
        assert!(matches!(tensor(&a, &b), Err(Error::CutoffMismatch { .. })));
    }

    #[test]
    fn partial_trace_of_vacuum_pair() {
        let v = basis_rho(3, 0);
        let vv = tensor(&v, &v).unwrap();
        let red = partial_trace(&vv, Mode::B).unwrap();
        assert_eq!(red, v);
    }

    #[test]
    fn partial_trace_of_maximally_entangled_is_identity_over_d() {
        let cutoff = 4;
        let d = cutoff + 1;
        let mut amps = CVector::zeros(d * d);
        for n in 0..d {
            amps[n * d + n] = C64::from(1.0 / (d as f64).sqrt());
        }
        let psi = FockKet::from_vector(cutoff, 2, amps).unwrap();
        let rho = DensityOperator::pure(&psi).unwrap();
        for mode in [Mode::A, Mode::B] {
            let red = partial_trace(&rho, mode).unwrap();
            for i in 0..d {
                for j in 0..d {
                    let expect = if i == j { 1.0 / d as f64 } else { 0.0 };
                    assert_abs_diff_eq!(red.matrix()[(i, j)].re, expect, epsilon = 1e-14);
                    assert_abs_diff_eq!(red.matrix()[(i, j)].im, 0.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn partial_trace_rejects_single_mode() {
        assert!(partial_trace(&basis_rho(3, 0), Mode::B).is_err());
    }

    #[test]
    fn arm_application_matches_kronecker() {
        let cutoff = 3;
        let d = cutoff + 1;
        let amps = CVector::from_fn(d * d, |i, _| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()));
        let psi = FockKet::from_vector(cutoff, 2, amps).unwrap();
        let a = ModeOperator::annihilation(cutoff);
        for mode in [Mode::A, Mode::B] {
            let lifted = a.on_mode(mode).unwrap();
            let direct = lifted.matrix() * psi.amplitudes();
            let fast = psi.apply_on(&a, mode).unwrap();
            assert!((direct - fast.amplitudes()).norm() < 1e-13);
        }
    }

    #[test]
    fn fidelity_basics() {
        let r0 = basis_rho(5, 0);
        assert_eq!(fidelity_pure(&r0, &FockKet::vacuum(5).unwrap()).unwrap(), 1.0);
        assert_eq!(fidelity_pure(&r0, &FockKet::basis(5, 1).unwrap()).unwrap(), 0.0);
        // thermal weight on vacuum is 1/(n̄+1)
        let th = DensityOperator::thermal(1.0, 60).unwrap();
        let f = fidelity_pure(&th, &FockKet::vacuum(60).unwrap()).unwrap();
        assert_abs_diff_eq!(f, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_rejects_unnormalized_target() {
        let r0 = basis_rho(5, 0);
        let k = FockKet::vacuum(5).unwrap().scaled(C64::from(2.0));
        assert!(matches!(fidelity_pure(&r0, &k), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn wigner_anchors() {
        let vac = basis_rho(10, 0);
        assert_abs_diff_eq!(wigner_at(&vac, 0.0, 0.0), 1.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(
            wigner_at(&vac, 0.7, -0.4),
            (-(0.49 + 0.16f64)).exp() / PI,
            epsilon = 1e-15
        );
        let one = basis_rho(10, 1);
        assert_abs_diff_eq!(wigner_at(&one, 0.0, 0.0), -1.0 / PI, epsilon = 1e-15);
        // |1⟩: W = (2(x²+p²) - 1) e^{-x²-p²} / π
        let (x, p) = (0.8, 0.3);
        let r2: f64 = x * x + p * p;
        assert_abs_diff_eq!(
            wigner_at(&one, x, p),
            (2.0 * r2 - 1.0) * (-r2).exp() / PI,
            epsilon = 1e-14
        );
    }

    #[test]
    fn wigner_normalization_on_grid() {
        let vac = basis_rho(10, 0);
        let g = wigner(&vac, &GridSpec::symmetric(5.0, 101)).unwrap();
        assert_abs_diff_eq!(g.integral(), 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(g.max(), 1.0 / PI, epsilon = 1e-12);
    }

    #[test]
    fn wigner_off_diagonal_dyad_is_real_and_matches_superposition() {
        // (|0⟩+|1⟩)/√2: diagonal terms plus the coherence term.
        let k = FockKet::new(vec![C64::from(1.0 / 2f64.sqrt()), C64::from(1.0 / 2f64.sqrt()), ZERO]).unwrap();
        let rho = DensityOperator::pure(&k).unwrap();
        let (x, p) = (0.4f64, -0.9f64);
        let g = (-(x * x + p * p)).exp() / PI;
        let expect = 0.5 * g + 0.5 * (2.0 * (x * x + p * p) - 1.0) * g + 2f64.sqrt() * x * g;
        assert_abs_diff_eq!(wigner_at(&rho, x, p), expect, epsilon = 1e-14);
    }

    #[test]
    fn density_validation() {
        let bad = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::from(1.2), C64::from(-0.2)]));
        assert!(matches!(
            DensityOperator::from_matrix(1, 1, bad),
            Err(Error::NotPositive(_))
        ));
        let noisy = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::from(1.0 + 5e-10), C64::from(-5e-10)]));
        let rho = DensityOperator::from_matrix(1, 1, noisy).unwrap();
        assert!(rho.eigenvalues().iter().all(|&v| v >= -1e-15));
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-14);
        let mut nh = CMatrix::identity(2, 2) * C64::from(0.5);
        nh[(0, 1)] = C64::new(0.0, 0.1);
        assert!(matches!(
            DensityOperator::from_matrix(1, 1, nh),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let k = FockKet::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let rho = DensityOperator::pure(&k).unwrap();
        let mut buf = Vec::new();
        rho.write_json(&mut buf).unwrap();
        assert_eq!(DensityOperator::read_json(buf.as_slice()).unwrap(), rho);
        let mut buf = Vec::new();
        k.write_json(&mut buf).unwrap();
        assert_eq!(FockKet::read_json(buf.as_slice()).unwrap(), k);
    }

    #[test]
    fn rotation_by_pi_flips_odd_amplitudes() {
        let k = FockKet::new(vec![C64::from(0.6), C64::from(0.8), ZERO]).unwrap();
        let r = k.rotated(std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(r.amplitudes()[1].re, -0.8, epsilon = 1e-15);
        let rho = DensityOperator::pure(&k).unwrap().rotated(0.7).unwrap();
        let direct = DensityOperator::pure(&k.rotated(0.7).unwrap()).unwrap();
        assert!((rho.matrix() - direct.matrix()).norm() < 1e-15);
    }

    #[test]
    fn truncation_check() {
        let k = FockKet::new(vec![C64::from(0.6), ZERO, ZERO, C64::from(0.8)]).unwrap();
        assert!(matches!(k.check_truncation(), Err(Error::Truncation { .. })));
        assert!(FockKet::vacuum(3).unwrap().check_truncation().is_ok());
    }
}
