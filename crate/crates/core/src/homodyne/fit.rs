use serde::{Deserialize, Serialize};

use super::{BinProjectors, BinnedData, Binning, Histogram, QuadratureRecord};
use crate::channel::{gate, gate_branches, GateParams};
use crate::error::{Error, Result};
use crate::fock::DensityOperator;
use crate::optimize::{golden_section, nelder_mead};
use crate::states::{gaussian_model_state, SqueezerModel, DEFAULT_CUTOFF};

/// Expected counts below this are left out of the χ² sum.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;
const INFEASIBLE: f64 = 1e30;
const PENALTY: f64 = 1e6;
const S_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub cutoff: usize,
    pub binning: Binning,
    pub max_iterations: usize,
    /// Bracket width at which the ξ search stops.
    pub xi_tol: f64,
    /// Holds the parasite gain fixed instead of fitting it.
    pub fixed_h: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            binning: Binning::default(),
            max_iterations: 1000,
            xi_tol: 1e-4,
            fixed_h: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SqueezerFit {
    pub model: SqueezerModel,
    /// Starting point from the phase-variance law.
    pub initial: SqueezerModel,
    pub nll: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct XiFit {
    pub xi: f64,
    pub nll: f64,
}

/// Least-squares fit of `V(φ) = V_x cos²φ + V_p sin²φ` to per-phase
/// sample variances, weighted by sample count.
fn variance_law(rec: &QuadratureRecord) -> Result<(f64, f64)> {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (phi, xs) in rec.phase_groups() {
        if xs.len() < 2 {
            continue;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (s, c) = phi.sin_cos();
        let (u, v) = (c * c, s * s);
        a11 += n * u * u;
        a12 += n * u * v;
        a22 += n * v * v;
        b1 += n * u * var;
        b2 += n * v * var;
    }
    let det = a11 * a22 - a12 * a12;
    if det <= 1e-6 * (a11 * a22).max(f64::MIN_POSITIVE) {
        return Err(Error::DegeneratePhases("phases must probe both quadratures".into()));
    }
    Ok(((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det))
}

fn model_nll(data: &BinnedData, proj: &BinProjectors, s: f64, h: f64) -> f64 {
    let eval = || -> Result<f64> {
        let rho = gaussian_model_state(&SqueezerModel::new(s, h)?, proj.cutoff())?;
        data.nll(proj, &rho)
    };
    eval().unwrap_or(INFEASIBLE)
}

/// Fits the source model `(s, h)` to homodyne data of the input state by
/// binned maximum likelihood.
pub fn fit_squeezer(rec: &QuadratureRecord, opts: &FitOptions) -> Result<SqueezerFit> {
    let data = BinnedData::from_record(rec, &opts.binning)?;
    let (vx, vp) = variance_law(rec)?;
    let s0 = ((2.0 * vx + 1.0) / (2.0 * vp + 1.0)).clamp(S_FLOOR, 1.0);
    let h0 = ((2.0 * vx + 1.0) / (s0 + 1.0)).max(1.0);
    let h0 = opts.fixed_h.unwrap_or(h0);
    let initial = SqueezerModel::new(s0, h0)?;
    let proj = BinProjectors::new(opts.binning, opts.cutoff);

    if let Some(h) = opts.fixed_h {
        SqueezerModel::new(1.0, h)?;
        let (s, nll) = golden_section(|s| model_nll(&data, &proj, s, h), S_FLOOR, 1.0, 1e-6);
        if nll >= INFEASIBLE {
            return Err(Error::NoConvergence(0));
        }
        return Ok(SqueezerFit {
            model: SqueezerModel::new(s, h)?,
            initial,
            nll,
            iterations: 0,
        });
    }

    // infeasible points are projected onto the boundary and penalized
    let objective = |v: &[f64]| {
        let (s, h) = (v[0].clamp(S_FLOOR, 1.0), v[1].max(1.0));
        let dist = (v[0] - s).powi(2) + (v[1] - h).powi(2);
        model_nll(&data, &proj, s, h) + PENALTY * dist
    };
    let min = nelder_mead(objective, &[s0, h0], &[0.05, 0.02], 1e-6, 1e-6, opts.max_iterations)?;
    if min.value >= INFEASIBLE {
        return Err(Error::NoConvergence(min.iterations));
    }
    Ok(SqueezerFit {
        model: SqueezerModel::new(min.x[0].clamp(S_FLOOR, 1.0), min.x[1].max(1.0))?,
        initial,
        nll: min.value,
        iterations: min.iterations,
    })
}

/// Fits the modal purity to homodyne data of the gate output, with the
/// source model, transmissivity and homodyne efficiency frozen.
pub fn fit_xi(
    rec: &QuadratureRecord,
    model: &SqueezerModel,
    transmissivity: f64,
    eta: f64,
    opts: &FitOptions,
) -> Result<XiFit> {
    let data = BinnedData::from_record(rec, &opts.binning)?;
    let rho0 = gaussian_model_state(model, opts.cutoff)?;
    let p = GateParams {
        transmissivity,
        xi: 1.0,
        kappa: eta,
        eta,
        cutoff: opts.cutoff,
    };
    let branches = gate_branches(&rho0, &p)?;
    let good = branches
        .good
        .as_ref()
        .map(|g| &g.state)
        .expect("heralded branch at xi = 1");
    let proj = BinProjectors::new(opts.binning, opts.cutoff);
    // bin probabilities are affine in ξ
    let mut pg = Vec::with_capacity(data.phases.len());
    let mut pb = Vec::with_capacity(data.phases.len());
    for &phi in &data.phases {
        pg.push(proj.probabilities(good, phi)?);
        pb.push(proj.probabilities(&branches.bad.state, phi)?);
    }
    let nll = |xi: f64| -> f64 {
        data.counts
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let probs: Vec<f64> = pg[j].iter().zip(&pb[j]).map(|(g, b)| xi * g + (1.0 - xi) * b).collect();
                super::nll_of(c, &probs)
            })
            .sum()
    };
    let samples = [nll(0.0), nll(0.5), nll(1.0)];
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi - lo < 1e-9 * hi.abs().max(1.0) {
        return Err(Error::FlatObjective("likelihood does not depend on xi".into()));
    }
    let (xi, value) = golden_section(nll, 0.0, 1.0, opts.xi_tol);
    Ok(XiFit { xi, nll: value })
}

/// Goodness of fit of a predicted state against observed histograms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub phases: Vec<f64>,
    /// Reduced χ² per phase over bins with at least five expected counts.
    pub chi2_per_phase: Vec<f64>,
    pub dof_per_phase: Vec<usize>,
    /// `Σχ² / Σdof` over all phases.
    pub pooled_chi2: f64,
    /// `Σ_k min(observed_k, predicted_k)` of the normalized histograms.
    pub overlap_per_phase: Vec<f64>,
}

impl Comparison {
    pub fn max_chi2(&self) -> f64 {
        self.chi2_per_phase.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Compares a state with observed histograms.
pub fn compare_histograms(predicted: &DensityOperator, hists: &[Histogram], binning: &Binning) -> Result<Comparison> {
    let data = BinnedData::from_histograms(hists, binning)?;
    let proj = BinProjectors::new(*binning, predicted.cutoff());
    let mut out = Comparison {
        phases: data.phases.clone(),
        chi2_per_phase: Vec::new(),
        dof_per_phase: Vec::new(),
        pooled_chi2: 0.0,
        overlap_per_phase: Vec::new(),
    };
    let (mut chi_total, mut dof_total) = (0.0, 0usize);
    for (phi, counts) in data.phases.iter().zip(&data.counts) {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptyData(format!("no samples at phase {phi}")));
        }
        let probs = proj.probabilities(predicted, *phi)?;
        let (mut chi, mut used) = (0.0, 0usize);
        let mut overlap = 0.0;
        for (&c, &p) in counts.iter().zip(&probs) {
            overlap += (c as f64 / n as f64).min(p.max(0.0));
            let e = n as f64 * p;
            if e >= MIN_EXPECTED_COUNT {
                chi += (c as f64 - e).powi(2) / e;
                used += 1;
            }
        }
        if used < 2 {
            return Err(Error::Binning(format!("fewer than two usable bins at phase {phi}")));
        }
        let dof = used - 1;
        out.chi2_per_phase.push(chi / dof as f64);
        out.dof_per_phase.push(dof);
        out.overlap_per_phase.push(overlap);
        chi_total += chi;
        dof_total += dof;
    }
    out.pooled_chi2 = chi_total / dof_total as f64;
    Ok(out)
}

/// Predicts the gate output from the model input and scores it against the
/// observed record. Nothing is fitted at this stage.
pub fn predict_and_compare(
    rho_input: &DensityOperator,
    p: &GateParams,
    observed: &QuadratureRecord,
    binning: &Binning,
) -> Result<Comparison> {
    let predicted = gate(rho_input, p)?;
    compare_histograms(&predicted, &observed.histograms(binning)?, binning)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockKet;
    use crate::homodyne::{sample, uniform_phases};

    fn model_record(m: &SqueezerModel, n_total: usize, seed: u64) -> QuadratureRecord {
        let rho = gaussian_model_state(m, DEFAULT_CUTOFF).unwrap();
        sample(&rho, &uniform_phases(12), n_total / 12, seed).unwrap()
    }

    #[test]
    fn variance_law_recovers_model_variances() {
        let m = SqueezerModel::new(0.5, 1.05).unwrap();
        let (vx, vp) = variance_law(&model_record(&m, 120_000, 5)).unwrap();
        assert!((vx - m.vx()).abs() < 0.01, "{vx}");
        assert!((vp - m.vp()).abs() < 0.02, "{vp}");
    }

    #[test]
    fn squeezer_round_trip() {
        let m = SqueezerModel::new(0.5, 1.05).unwrap();
        let fit = fit_squeezer(&model_record(&m, 100_000, 21), &FitOptions::default()).unwrap();
        assert!((fit.model.s - 0.5).abs() < 0.02, "{:?}", fit.model);
        assert!((fit.model.h - 1.05).abs() < 0.02, "{:?}", fit.model);
    }

    #[test]
    fn vacuum_fit_is_unsqueezed() {
        let vac = DensityOperator::pure(&FockKet::vacuum(DEFAULT_CUTOFF).unwrap()).unwrap();
        let rec = sample(&vac, &uniform_phases(12), 100_000 / 12, 8).unwrap();
        let fit = fit_squeezer(&rec, &FitOptions::default()).unwrap();
        assert!((fit.model.s - 1.0).abs() < 0.02, "{:?}", fit.model);
        assert!((fit.model.h - 1.0).abs() < 0.02, "{:?}", fit.model);
    }

    #[test]
    fn fixed_gain_matches_variance() {
        let m = SqueezerModel::new(0.6, 1.0).unwrap();
        let rec = model_record(&m, 60_000, 2);
        let opts = FitOptions {
            fixed_h: Some(1.0),
            ..FitOptions::default()
        };
        let fit = fit_squeezer(&rec, &opts).unwrap();
        let v0 = {
            let xs = &rec.phase_groups()[0].1;
            xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
        };
        assert!((fit.model.s - 2.0 * v0).abs() < 0.02);
        assert!((fit.model.s - 0.6).abs() < 0.02);
    }

    #[test]
    fn one_quadrature_is_not_enough() {
        let m = SqueezerModel::new(0.5, 1.0).unwrap();
        let rho = gaussian_model_state(&m, DEFAULT_CUTOFF).unwrap();
        let rec = sample(&rho, &[0.0], 2000, 1).unwrap();
        assert!(matches!(
            fit_squeezer(&rec, &FitOptions::default()),
            Err(Error::DegeneratePhases(_))
        ));
    }

    #[test]
    fn xi_fit_needs_a_heralded_branch() {
        let m = SqueezerModel::new(1.0, 1.0).unwrap();
        let rho = gaussian_model_state(&m, DEFAULT_CUTOFF).unwrap();
        let rec = sample(&rho, &uniform_phases(4), 100, 1).unwrap();
        assert!(fit_xi(&rec, &m, 0.9, 1.0, &FitOptions::default()).is_err());
    }

    #[test]
    fn binning_mismatch_is_reported() {
        let vac = DensityOperator::pure(&FockKet::vacuum(DEFAULT_CUTOFF).unwrap()).unwrap();
        let rec = sample(&vac, &uniform_phases(2), 100, 1).unwrap();
        let hists = rec.histograms(&Binning::new(-4.0, 4.0, 32).unwrap()).unwrap();
        assert!(matches!(
            compare_histograms(&vac, &hists, &Binning::default()),
            Err(Error::Binning(_))
        ));
        let empty = QuadratureRecord::new(vec![], None).unwrap();
        let p = GateParams::default();
        assert!(predict_and_compare(&vac, &p, &empty, &Binning::default()).is_err());
    }
}
