//! Gate figures of merit: Bloch-sphere fidelity maps, the entangled-probe
//! fidelity, cat-qubit adequacy and best-matching cat amplitudes.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{arm_branches, gate, success_probability, GateParams};
use crate::error::{Error, Result};
use crate::fock::{fidelity_pure, DensityOperator, Mode};
use crate::optimize::golden_section;
use crate::states::{self, adequate_cutoff, BellKind, BlochPoint, CatQubitSpec, Parity, TWO_MODE_CUTOFF};

/// Sampling of the Bloch sphere: `θ` from 0 to π inclusive, `φ` over `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlochGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for BlochGrid {
    fn default() -> Self {
        Self { n_theta: 37, n_phi: 72 }
    }
}

impl BlochGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 || n_phi < 1 {
            return Err(Error::param(
                "grid",
                format!("{n_theta} x {n_phi} (need n_theta >= 2, n_phi >= 1)"),
            ));
        }
        Ok(Self { n_theta, n_phi })
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta)
            .map(|i| PI * i as f64 / (self.n_theta - 1) as f64)
            .collect()
    }

    pub fn phis(&self) -> Vec<f64> {
        (0..self.n_phi)
            .map(|j| 2.0 * PI * j as f64 / self.n_phi as f64)
            .collect()
    }
}

/// Fidelity `F_{θ,φ}` of the gate output with the ideal flipped state.
#[derive(Clone, Debug)]
pub struct FidelityMap {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// Rows follow `thetas`, columns follow `phis`.
    pub values: DMatrix<f64>,
    pub params: GateParams,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub min: f64,
    pub max: f64,
    pub argmin_theta: f64,
    pub argmin_phi: f64,
    pub equator_mean: f64,
    pub pole_mean: f64,
}

impl FidelityMap {
    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// `(θ, φ)` of the smallest fidelity.
    pub fn argmin(&self) -> (f64, f64) {
        let mut best = (0, 0);
        for i in 0..self.values.nrows() {
            for j in 0..self.values.ncols() {
                if self.values[(i, j)] < self.values[best] {
                    best = (i, j);
                }
            }
        }
        (self.thetas[best.0], self.phis[best.1])
    }

    /// Row closest to `θ = π/2`.
    pub fn equator_row(&self) -> usize {
        closest(&self.thetas, FRAC_PI_2)
    }

    pub fn equator_mean(&self) -> f64 {
        self.values.row(self.equator_row()).mean()
    }

    /// Mean over the rows at `θ = 0` and `θ = π`.
    pub fn pole_mean(&self) -> f64 {
        let last = self.thetas.len() - 1;
        0.5 * (self.values.row(0).mean() + self.values.row(last).mean())
    }

    /// Population standard deviation over `φ` of one `θ` row.
    pub fn phi_spread(&self, row: usize) -> f64 {
        let r = self.values.row(row);
        let m = r.mean();
        (r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / r.len() as f64).sqrt()
    }

    /// Fidelity at the grid point nearest `(θ, φ)`.
    pub fn at(&self, theta: f64, phi: f64) -> f64 {
        self.values[(
            closest(&self.thetas, theta),
            closest(&self.phis, phi.rem_euclid(2.0 * PI)),
        )]
    }

    /// Smallest pointwise difference `self − other`.
    pub fn min_difference(&self, other: &FidelityMap) -> Result<f64> {
        if self.values.shape() != other.values.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok((&self.values - &other.values).min())
    }

    pub fn summary(&self) -> MapSummary {
        let (argmin_theta, argmin_phi) = self.argmin();
        MapSummary {
            min: self.min(),
            max: self.max(),
            argmin_theta,
            argmin_phi,
            equator_mean: self.equator_mean(),
            pole_mean: self.pole_mean(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["theta_rad", "phi_rad", "fidelity"])?;
        for (i, t) in self.thetas.iter().enumerate() {
            for (j, p) in self.phis.iter().enumerate() {
                out.write_record([t.to_string(), p.to_string(), self.values[(i, j)].to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn closest(axis: &[f64], v: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// `⟨ψ_{−θ,φ}| 𝓔(|ψ_{θ,φ}⟩⟨ψ_{θ,φ}|) |ψ_{−θ,φ}⟩`.
pub fn point_fidelity(spec: &CatQubitSpec, p: &GateParams, b: BlochPoint) -> Result<f64> {
    let input = DensityOperator::pure(&spec.cat(b)?)?;
    fidelity_pure(&gate(&input, p)?, &spec.cat(b.flipped())?)
}

/// Fidelity map over the Bloch sphere. The gate runs at the cutoff of `spec`.
pub fn bloch_sweep(spec: &CatQubitSpec, p: &GateParams, grid: &BlochGrid) -> Result<FidelityMap> {
    let p = p.with_cutoff(spec.cutoff);
    p.validate()?;
    let (thetas, phis) = (grid.thetas(), grid.phis());
    let points: Vec<(usize, usize)> = (0..thetas.len())
        .flat_map(|i| (0..phis.len()).map(move |j| (i, j)))
        .collect();
    let values = points
        .par_iter()
        .map(|&(i, j)| point_fidelity(spec, &p, BlochPoint::new(thetas[i], phis[j])))
        .collect::<Result<Vec<f64>>>()?;
    Ok(FidelityMap {
        values: DMatrix::from_row_slice(thetas.len(), phis.len(), &values),
        thetas,
        phis,
        params: p,
        alpha: spec.alpha,
    })
}

/// A sampled scalar function of one swept variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub variable: String,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn new(variable: impl Into<String>, xs: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            variable: variable.into(),
            xs,
            values,
        }
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([self.variable.as_str(), "value"])?;
        for (x, v) in self.xs.iter().zip(&self.values) {
            out.write_record([x.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `F_{θ,φ}` as a function of the beamsplitter transmissivity.
pub fn t_limit_study(spec: &CatQubitSpec, p: &GateParams, b: BlochPoint, transmissivities: &[f64]) -> Result<Curve> {
    let values = transmissivities
        .iter()
        .map(|&t| point_fidelity(spec, &p.with_transmissivity(t).with_cutoff(spec.cutoff), b))
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve::new("T", transmissivities.to_vec(), values))
}

/// Which ideal output the entangled fidelity is scored against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntangledTarget {
    /// `(I ⊗ a)|probe⟩`, normalized.
    Subtracted,
    /// The probe with `μ` and `ν` exchanged on the gate arm.
    BitFlipped,
}

/// Entangled-probe fidelity of the heralded branch, the faulty branch and
/// their `ξ`-mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchFidelities {
    pub good: f64,
    pub bad: f64,
    pub mixture: f64,
}

pub fn entangled_branch_fidelities(
    spec: &CatQubitSpec,
    p: &GateParams,
    probe: BellKind,
    target: EntangledTarget,
) -> Result<BranchFidelities> {
    let p = p.with_cutoff(spec.cutoff);
    let psi = states::bell_cat(spec, probe)?;
    let ideal = match target {
        EntangledTarget::Subtracted => states::omega_target(&psi)?,
        EntangledTarget::BitFlipped => states::bell_cat(spec, probe.bit_flipped())?,
    };
    let (good, bad) = arm_branches(&psi, &p.with_xi(1.0), Mode::B)?;
    let good = good.expect("heralded branch at xi = 1");
    let chi = DensityOperator::mix(&[(p.xi, &good.state), (1.0 - p.xi, &bad.state)])?;
    Ok(BranchFidelities {
        good: fidelity_pure(&good.state, &ideal)?,
        bad: fidelity_pure(&bad.state, &ideal)?,
        mixture: fidelity_pure(&chi, &ideal)?,
    })
}

/// `F = ⟨Ω|χ|Ω⟩` for the gate acting on the second arm of `probe`.
pub fn entangled_fidelity(spec: &CatQubitSpec, p: &GateParams, probe: BellKind) -> Result<f64> {
    Ok(entangled_branch_fidelities(spec, p, probe, EntangledTarget::Subtracted)?.mixture)
}

/// `F(ξ)` at the given purities, from one evaluation of each branch.
pub fn xi_sweep(spec: &CatQubitSpec, p: &GateParams, xis: &[f64]) -> Result<Curve> {
    let f = entangled_branch_fidelities(spec, &p.with_xi(1.0), BellKind::PhiPlus, EntangledTarget::Subtracted)?;
    let values = xis
        .iter()
        .map(|&xi| {
            p.with_xi(xi).validate()?;
            Ok(xi * f.good + (1.0 - xi) * f.bad)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve::new("xi", xis.to_vec(), values))
}

/// `|⟨Ψ⁺|Ω⟩|²` computed from the Fock vectors.
pub fn cat_adequacy(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", format!("{alpha} (must be > 0)")));
    }
    let cutoff = adequate_cutoff(alpha, 1e-16).max(8);
    let spec = CatQubitSpec::new(alpha, cutoff)?;
    let phi = states::bell_cat(&spec, BellKind::PhiPlus)?;
    let omega = states::omega_target(&phi)?;
    let psi = states::bell_cat(&spec, BellKind::PsiPlus)?;
    Ok(psi.overlap(&omega)?.norm_sqr())
}

/// `½(1 + tanh 2α²)`, the closed form of [`cat_adequacy`].
pub fn cat_adequacy_closed_form(alpha: f64) -> f64 {
    0.5 * (1.0 + (2.0 * alpha * alpha).tanh())
}

/// `½(1 + tanh α²)`: the form sometimes quoted for the same quantity. It
/// does not match the Fock-space computation.
pub fn cat_adequacy_alternate_form(alpha: f64) -> f64 {
    0.5 * (1.0 + (alpha * alpha).tanh())
}

pub fn cat_adequacy_curve(alphas: &[f64]) -> Result<Curve> {
    let values = alphas.iter().map(|&a| cat_adequacy(a)).collect::<Result<Vec<_>>>()?;
    Ok(Curve::new("alpha", alphas.to_vec(), values))
}

/// Orientation of the cat in phase space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CatAxis {
    /// `|α⟩ − |−α⟩`, displaced along `x`.
    Real,
    /// `|iα⟩ − |−iα⟩`, displaced along `p`.
    Imaginary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub fidelity: f64,
    pub axis: CatAxis,
}

pub const ALPHA_SEARCH: (f64, f64) = (0.1, 3.0);
const ALPHA_SCAN_POINTS: usize = 59;

/// `⟨cat|ρ|cat⟩` for the odd cat of amplitude `alpha` along `axis`, with
/// the cat built at an adequate cutoff and projected onto the space of `rho`.
pub fn odd_cat_fidelity(rho: &DensityOperator, alpha: f64, axis: CatAxis) -> Result<f64> {
    let cutoff = rho.cutoff().max(adequate_cutoff(alpha, 1e-14));
    let mut cat = CatQubitSpec::new(alpha, cutoff)?.logical(Parity::Odd)?;
    if axis == CatAxis::Imaginary {
        cat = cat.rotated(FRAC_PI_2)?;
    }
    let amps = cat.amplitudes().rows(0, rho.cutoff() + 1).into_owned();
    Ok((amps.adjoint() * rho.matrix() * amps)[(0, 0)].re.clamp(0.0, 1.0))
}

/// `F(α)` on an evenly spaced scan of `[lo, hi]`.
pub fn alpha_scan(rho: &DensityOperator, axis: CatAxis, lo: f64, hi: f64, n: usize) -> Result<Curve> {
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let values = xs
        .iter()
        .map(|&a| odd_cat_fidelity(rho, a, axis))
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve::new("alpha", xs, values))
}

/// Amplitude of the odd cat closest to `rho`, searched along both phase
/// space axes on `[0.1, 3]`.
pub fn optimal_alpha(rho: &DensityOperator) -> Result<AlphaFit> {
    if rho.modes() != 1 {
        return Err(Error::ModeCount {
            expected: 1,
            got: rho.modes(),
        });
    }
    let (lo, hi) = ALPHA_SEARCH;
    let mut best: Option<AlphaFit> = None;
    let mut spread = 0.0f64;
    for axis in [CatAxis::Real, CatAxis::Imaginary] {
        let scan = alpha_scan(rho, axis, lo, hi, ALPHA_SCAN_POINTS)?;
        let (k, _) = scan
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty scan");
        let vmin = scan.values.iter().cloned().fold(f64::INFINITY, f64::min);
        spread = spread.max(scan.values[k] - vmin);
        let a = scan.xs[k.saturating_sub(1)];
        let b = scan.xs[(k + 1).min(scan.xs.len() - 1)];
        let (alpha, neg) = golden_section(|x| -odd_cat_fidelity(rho, x, axis).unwrap_or(0.0), a, b, 1e-5);
        let fit = AlphaFit {
            alpha,
            fidelity: -neg,
            axis,
        };
        if best.is_none_or(|f| fit.fidelity > f.fidelity) {
            best = Some(fit);
        }
    }
    if spread < 1e-12 {
        return Err(Error::FlatObjective(
            "fidelity with odd cats does not depend on alpha".into(),
        ));
    }
    Ok(best.expect("two axes searched"))
}

/// One probe of the invariance suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceEntry {
    pub mu: Parity,
    pub phi: f64,
    pub subtracted: BranchFidelities,
    pub bit_flipped: BranchFidelities,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub entries: Vec<InvarianceEntry>,
}

pub const INVARIANCE_PHASES: [f64; 4] = [0.0, FRAC_PI_2, PI, 2.1];

impl InvarianceReport {
    fn spread(&self, f: impl Fn(&InvarianceEntry) -> f64) -> f64 {
        let vals: Vec<f64> = self.entries.iter().map(f).collect();
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// Largest spread across probes of each column: good, bad and mixture
    /// against the subtracted target, then the same against the bit-flipped target.
    pub fn spreads(&self) -> [f64; 6] {
        [
            self.spread(|e| e.subtracted.good),
            self.spread(|e| e.subtracted.bad),
            self.spread(|e| e.subtracted.mixture),
            self.spread(|e| e.bit_flipped.good),
            self.spread(|e| e.bit_flipped.bad),
            self.spread(|e| e.bit_flipped.mixture),
        ]
    }

    pub fn max_spread(&self) -> f64 {
        self.spreads().into_iter().fold(0.0, f64::max)
    }
}

/// Entangled fidelities for `μ ∈ {+, −}` and the probe phases in
/// [`INVARIANCE_PHASES`].
pub fn bell_invariance_suite(spec: &CatQubitSpec, p: &GateParams) -> Result<InvarianceReport> {
    let probes: Vec<(Parity, f64)> = [Parity::Even, Parity::Odd]
        .iter()
        .flat_map(|&mu| INVARIANCE_PHASES.iter().map(move |&phi| (mu, phi)))
        .collect();
    let entries = probes
        .par_iter()
        .map(|&(mu, phi)| {
            let probe = BellKind::General { mu, phi };
            Ok(InvarianceEntry {
                mu,
                phi,
                subtracted: entangled_branch_fidelities(spec, p, probe, EntangledTarget::Subtracted)?,
                bit_flipped: entangled_branch_fidelities(spec, p, probe, EntangledTarget::BitFlipped)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InvarianceReport { entries })
}

/// Single-number summary of a gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub params: GateParams,
    pub alpha: f64,
    pub entangled_fidelity: f64,
    pub cat_adequacy: f64,
    /// `½(1 + tanh 2α²)`; matches `cat_adequacy`.
    pub cat_adequacy_closed_form: f64,
    /// `½(1 + tanh α²)`; recorded for comparison, does not match.
    pub cat_adequacy_alternate_form: f64,
    /// Relative herald rate for the coherent input `|α⟩`.
    pub success_rate: f64,
    pub map: MapSummary,
}

pub fn characterize(alpha: f64, p: &GateParams, grid: &BlochGrid) -> Result<CharacterizationReport> {
    let spec = CatQubitSpec::new(alpha, p.cutoff)?;
    let map = bloch_sweep(&spec, p, grid)?;
    let two_mode = CatQubitSpec::new(alpha, TWO_MODE_CUTOFF.max(p.cutoff))?;
    let coherent = DensityOperator::pure(&states::coherent(alpha, p.cutoff)?)?;
    Ok(CharacterizationReport {
        params: *p,
        alpha,
        entangled_fidelity: entangled_fidelity(&two_mode, p, BellKind::PhiPlus)?,
        cat_adequacy: cat_adequacy(alpha)?,
        cat_adequacy_closed_form: cat_adequacy_closed_form(alpha),
        cat_adequacy_alternate_form: cat_adequacy_alternate_form(alpha),
        success_rate: success_probability(&coherent, p)?,
        map: map.summary(),
    })
}

/// Parameter sets of the four Bloch-map panels. Each varies one knob from `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapPreset {
    /// `T = 0.9, ξ = 0.83, α = 0.92`
    A,
    /// `ξ = 1`
    B,
    /// `T = 0.99`, `ξ` kept at 0.83
    C,
    /// `α = 1.2`
    D,
}

impl MapPreset {
    pub const ALL: [MapPreset; 4] = [MapPreset::A, MapPreset::B, MapPreset::C, MapPreset::D];

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim_start_matches("fig3").to_ascii_lowercase().as_str() {
            "a" => Ok(MapPreset::A),
            "b" => Ok(MapPreset::B),
            "c" => Ok(MapPreset::C),
            "d" => Ok(MapPreset::D),
            _ => Err(Error::Unknown {
                kind: "map preset",
                name: name.to_string(),
            }),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MapPreset::A => "fig3a",
            MapPreset::B => "fig3b",
            MapPreset::C => "fig3c",
            MapPreset::D => "fig3d",
        }
    }

    /// `(α, gate parameters)`.
    pub fn params(self) -> (f64, GateParams) {
        let base = GateParams {
            transmissivity: 0.9,
            xi: 0.83,
            ..GateParams::default()
        };
        match self {
            MapPreset::A => (0.92, base),
            MapPreset::B => (0.92, base.with_xi(1.0)),
            MapPreset::C => (0.92, base.with_transmissivity(0.99)),
            MapPreset::D => (1.2, base),
        }
    }

    pub fn sweep(self, grid: &BlochGrid) -> Result<FidelityMap> {
        let (alpha, p) = self.params();
        bloch_sweep(&CatQubitSpec::new(alpha, p.cutoff)?, &p, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockKet;
    use approx::assert_abs_diff_eq;

    fn preset_a() -> (CatQubitSpec, GateParams) {
        let (alpha, p) = MapPreset::A.params();
        (CatQubitSpec::new(alpha, p.cutoff).unwrap(), p)
    }

    #[test]
    fn map_orderings_at_reference_point() {
        let grid = BlochGrid::new(13, 24).unwrap();
        let a = MapPreset::A.sweep(&grid).unwrap();
        assert!(a.pole_mean() > a.equator_mean());
        assert!(a.at(FRAC_PI_2, PI) > a.at(FRAC_PI_2, 0.0));
        assert!(a.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let (theta, _) = a.argmin();
        assert_abs_diff_eq!(theta, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn conjugation_symmetry() {
        let (spec, p) = preset_a();
        for (t, f) in [(0.7, 0.9), (FRAC_PI_2, 2.5), (2.4, 1.3)] {
            let a = point_fidelity(&spec, &p, BlochPoint::new(t, f)).unwrap();
            let b = point_fidelity(&spec, &p, BlochPoint::new(t, -f)).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn map_is_monotone_in_purity() {
        let (spec, p) = preset_a();
        let grid = BlochGrid::new(7, 8).unwrap();
        let lo = bloch_sweep(&spec, &p.with_xi(0.5), &grid).unwrap();
        let hi = bloch_sweep(&spec, &p, &grid).unwrap();
        assert!(hi.min_difference(&lo).unwrap() >= -1e-12);
    }

    #[test]
    fn t_limit_is_monotone() {
        let (spec, p) = preset_a();
        let c = t_limit_study(
            &spec,
            &p.with_xi(1.0),
            BlochPoint::new(PI / 4.0, 0.0),
            &[0.9, 0.95, 0.99, 0.999],
        )
        .unwrap();
        assert!(c.is_non_decreasing());
    }

    #[test]
    fn adequacy_matches_closed_form() {
        assert_abs_diff_eq!(cat_adequacy(0.92).unwrap(), 0.967, epsilon = 1e-3);
        for a in [0.2, 0.5, 1.0, 1.7, 2.4, 3.0] {
            assert_abs_diff_eq!(cat_adequacy(a).unwrap(), cat_adequacy_closed_form(a), epsilon = 1e-10);
        }
        assert!(cat_adequacy(3.0).unwrap() > 0.9999);
        assert!(cat_adequacy(0.0).is_err());
        assert!((cat_adequacy_alternate_form(0.92) - 0.967).abs() > 0.1);
    }

    #[test]
    fn entangled_fidelity_is_affine_and_probe_independent() {
        let spec = CatQubitSpec::new(0.92, 24).unwrap();
        let p = GateParams::new(0.9, 0.83).unwrap();
        let f = |xi: f64| entangled_fidelity(&spec, &p.with_xi(xi), BellKind::PhiPlus).unwrap();
        assert_abs_diff_eq!(f(0.5), 0.5 * (f(0.0) + f(1.0)), epsilon = 1e-10);
        assert!(f(1.0) > f(0.0));
        let base = f(0.83);
        for kind in [
            BellKind::PsiPlus,
            BellKind::General {
                mu: Parity::Odd,
                phi: 1.234,
            },
        ] {
            assert_abs_diff_eq!(entangled_fidelity(&spec, &p, kind).unwrap(), base, epsilon = 1e-10);
        }
        let curve = xi_sweep(&spec, &p, &[0.0, 0.83, 1.0]).unwrap();
        assert_abs_diff_eq!(curve.values[1], base, epsilon = 1e-10);
    }

    #[test]
    fn invariance_suite_small_cutoff() {
        let spec = CatQubitSpec::new(0.92, 20).unwrap();
        let report = bell_invariance_suite(&spec, &GateParams::new(0.9, 0.83).unwrap()).unwrap();
        assert_eq!(report.entries.len(), 8);
        assert!(report.max_spread() < 1e-10, "{:?}", report.spreads());
        let e = report.entries[0];
        assert!((e.subtracted.mixture - e.bit_flipped.mixture).abs() > 1e-3);
    }

    #[test]
    fn optimal_alpha_recovers_odd_cat() {
        let cat = CatQubitSpec::new(1.1, 20).unwrap().logical(Parity::Odd).unwrap();
        let fit = optimal_alpha(&DensityOperator::pure(&cat).unwrap()).unwrap();
        assert_abs_diff_eq!(fit.alpha, 1.1, epsilon = 2e-3);
        assert_eq!(fit.axis, CatAxis::Real);
        assert_abs_diff_eq!(fit.fidelity, 1.0, epsilon = 1e-9);

        let rotated = cat.rotated(FRAC_PI_2).unwrap();
        let fit = optimal_alpha(&DensityOperator::pure(&rotated).unwrap()).unwrap();
        assert_eq!(fit.axis, CatAxis::Imaginary);
        assert_abs_diff_eq!(fit.alpha, 1.1, epsilon = 2e-3);
    }

    #[test]
    fn optimal_alpha_for_single_photon_is_small() {
        let one = DensityOperator::pure(&FockKet::basis(20, 1).unwrap()).unwrap();
        let fit = optimal_alpha(&one).unwrap();
        assert!(fit.alpha < 0.2, "{fit:?}");
    }

    #[test]
    fn preset_parsing() {
        assert_eq!(MapPreset::parse("fig3c").unwrap(), MapPreset::C);
        assert_eq!(MapPreset::parse("b").unwrap(), MapPreset::B);
        assert!(MapPreset::parse("fig3e").is_err());
        let (_, c) = MapPreset::C.params();
        assert_eq!(c.xi, 0.83);
    }

    #[test]
    fn csv_headers() {
        let (spec, p) = preset_a();
        let map = bloch_sweep(&spec, &p, &BlochGrid::new(2, 2).unwrap()).unwrap();
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta_rad,phi_rad,fidelity\n"));
        assert_eq!(text.lines().count(), 5);
        let mut buf = Vec::new();
        Curve::new("alpha", vec![1.0], vec![0.5]).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "alpha,value\n1,0.5\n");
    }
}
