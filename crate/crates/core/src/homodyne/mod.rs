//! Homodyne measurement: quadrature densities, synthetic sampling, binning,
//! maximum-likelihood reconstruction and model fits.

mod fit;
mod mle;

pub use fit::{
    compare_histograms, fit_squeezer, fit_xi, predict_and_compare, Comparison, FitOptions, SqueezerFit, XiFit,
};
pub use mle::{mle_reconstruct, MleOptions, Reconstruction};

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::DensityOperator;

/// Phases closer than this are treated as one LO setting.
pub const PHASE_TOL: f64 = 1e-9;
/// Largest tolerated population in the top Fock levels of a state whose
/// quadrature density is requested.
pub const DENSITY_TAIL_TOL: f64 = 1e-4;
const SIMPSON_STEPS: usize = 16;
const SAMPLING_STEP: f64 = 2e-3;

/// Hermite functions `ψ_0(x) … ψ_cutoff(x)`, `ψ_n(x) = ⟨x|n⟩`.
pub fn hermite_functions(x: f64, cutoff: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(cutoff + 1);
    psi.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if cutoff >= 1 {
        psi.push(2f64.sqrt() * x * psi[0]);
    }
    for n in 2..=cutoff {
        let nf = n as f64;
        let next = (2.0 / nf).sqrt() * x * psi[n - 1] - ((nf - 1.0) / nf).sqrt() * psi[n - 2];
        psi.push(next);
    }
    psi
}

/// Half-width beyond which every Hermite function up to `cutoff` is negligible.
fn support_half_width(cutoff: usize) -> f64 {
    (2.0 * cutoff as f64 + 1.0).sqrt().max(6.0) + 6.0
}

/// A record of homodyne samples `(φ, x_φ)`.
///
/// Phases are folded into `[0, π)` on ingestion using `x_{φ+π} = −x_φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRecord {
    samples: Vec<(f64, f64)>,
    seed: Option<u64>,
}

fn fold_phase(phi: f64, x: f64) -> (f64, f64) {
    let mut p = phi.rem_euclid(2.0 * PI);
    let mut x = x;
    if p >= PI {
        p -= PI;
        x = -x;
    }
    if PI - p < PHASE_TOL {
        p = 0.0;
        x = -x;
    }
    (p, x)
}

impl QuadratureRecord {
    pub fn new(samples: Vec<(f64, f64)>, seed: Option<u64>) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|(p, x)| !p.is_finite() || !x.is_finite()) {
            return Err(Error::param("samples", format!("non-finite sample {bad:?}")));
        }
        let samples = samples.into_iter().map(|(p, x)| fold_phase(p, x)).collect();
        Ok(Self { samples, seed })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples grouped by LO phase, in increasing phase order.
    pub fn phase_groups(&self) -> Vec<(f64, Vec<f64>)> {
        let mut sorted: Vec<(f64, f64)> = self.samples.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
        for (p, x) in sorted {
            match groups.last_mut() {
                Some((q, xs)) if (p - *q).abs() < PHASE_TOL => xs.push(x),
                _ => groups.push((p, vec![x])),
            }
        }
        groups
    }

    pub fn phases(&self) -> Vec<f64> {
        self.phase_groups().into_iter().map(|(p, _)| p).collect()
    }

    pub fn histograms(&self, binning: &Binning) -> Result<Vec<Histogram>> {
        if self.is_empty() {
            return Err(Error::EmptyData("quadrature record has no samples".into()));
        }
        Ok(self
            .phase_groups()
            .into_iter()
            .map(|(phase, xs)| Histogram::from_samples(phase, &xs, binning))
            .collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phase_rad", "quadrature"])?;
        for (p, x) in &self.samples {
            out.write_record([p.to_string(), x.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["phase_rad", "quadrature"] {
            return Err(Error::Config(format!(
                "quadrature CSV must have header phase_rad,quadrature (got {})",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for row in rdr.deserialize() {
            let (p, x): (f64, f64) = row?;
            samples.push((p, x));
        }
        Self::new(samples, None)
    }
}

/// Uniform quadrature bins. The first and last bins are open-ended and
/// collect the tails, so every sample lands in exactly one bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            lo: -5.0,
            hi: 5.0,
            bins: 64,
        }
    }
}

impl Binning {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || bins < 2 {
            return Err(Error::Binning(format!("invalid binning [{lo}, {hi}] with {bins} bins")));
        }
        Ok(Self { lo, hi, bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|k| self.lo + k as f64 * self.width()).collect()
    }

    pub fn index(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.width()).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.bins - 1)
        }
    }

    fn matches(&self, edges: &[f64]) -> bool {
        edges.len() == self.bins + 1 && self.edges().iter().zip(edges).all(|(a, b)| (a - b).abs() < 1e-9)
    }
}

/// Counts of one phase setting.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub phase: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_samples(phase: f64, xs: &[f64], binning: &Binning) -> Self {
        let mut counts = vec![0u64; binning.bins];
        for &x in xs {
            counts[binning.index(x)] += 1;
        }
        Self {
            phase,
            edges: binning.edges(),
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn binning(&self) -> Result<Binning> {
        let n = self.edges.len();
        if n < 3 {
            return Err(Error::Binning("histogram needs at least two bins".into()));
        }
        let b = Binning::new(self.edges[0], self.edges[n - 1], n - 1)?;
        if !b.matches(&self.edges) {
            return Err(Error::Binning("histogram edges are not uniform".into()));
        }
        Ok(b)
    }
}

pub fn write_histograms_csv<W: Write>(hists: &[Histogram], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["phase_rad", "x_lo", "x_hi", "count"])?;
    for h in hists {
        for (k, c) in h.counts.iter().enumerate() {
            out.write_record([
                h.phase.to_string(),
                h.edges[k].to_string(),
                h.edges[k + 1].to_string(),
                c.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_histograms_csv<R: Read>(r: R) -> Result<Vec<Histogram>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut hists: Vec<Histogram> = Vec::new();
    for row in rdr.deserialize() {
        let (phase, lo, hi, count): (f64, f64, f64, u64) = row?;
        match hists.last_mut() {
            Some(h) if (h.phase - phase).abs() < PHASE_TOL => {
                if (h.edges.last().copied().unwrap_or(f64::NAN) - lo).abs() > 1e-9 {
                    return Err(Error::Binning(format!("non-contiguous bins at phase {phase}")));
                }
                h.edges.push(hi);
                h.counts.push(count);
            }
            _ => hists.push(Histogram {
                phase,
                edges: vec![lo, hi],
                counts: vec![count],
            }),
        }
    }
    if hists.is_empty() {
        return Err(Error::EmptyData("histogram CSV has no rows".into()));
    }
    Ok(hists)
}

/// Bin-integrated matrix elements `B_k[m][n] = ∫_bin ψ_m(x) ψ_n(x) dx`.
///
/// The probability of bin `k` at phase `φ` is
/// `Σ_mn Re(ρ_mn e^{i(n−m)φ}) B_k[m][n]`.
#[derive(Clone, Debug)]
pub struct BinProjectors {
    binning: Binning,
    cutoff: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl BinProjectors {
    pub fn new(binning: Binning, cutoff: usize) -> Self {
        let d = cutoff + 1;
        let w = binning.width();
        let extra =
            ((support_half_width(cutoff) - binning.lo.abs().min(binning.hi.abs())).max(0.0) / w).ceil() as usize;
        let total = binning.bins + 2 * extra;
        let start = binning.lo - extra as f64 * w;
        let h = w / SIMPSON_STEPS as f64;
        let mut blocks = vec![DMatrix::<f64>::zeros(d, d); binning.bins];
        for v in 0..total {
            let target = v.saturating_sub(extra).min(binning.bins - 1);
            let b = &mut blocks[target];
            for s in 0..=SIMPSON_STEPS {
                let x = start + v as f64 * w + s as f64 * h;
                let weight = h / 3.0
                    * match s {
                        0 => 1.0,
                        s if s == SIMPSON_STEPS => 1.0,
                        s if s % 2 == 1 => 4.0,
                        _ => 2.0,
                    };
                let psi = hermite_functions(x, cutoff);
                for m in 0..d {
                    let pm = weight * psi[m];
                    for n in m..d {
                        b[(m, n)] += pm * psi[n];
                    }
                }
            }
        }
        for b in &mut blocks {
            for m in 0..d {
                for n in 0..m {
                    b[(m, n)] = b[(n, m)];
                }
            }
        }
        Self {
            binning,
            cutoff,
            blocks,
        }
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub(crate) fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// Bin probabilities of `rho` at LO phase `phi`.
    pub fn probabilities(&self, rho: &DensityOperator, phi: f64) -> Result<Vec<f64>> {
        if rho.cutoff() != self.cutoff {
            return Err(Error::CutoffMismatch {
                left: rho.cutoff(),
                right: self.cutoff,
            });
        }
        let s = rotated_real_part(rho, phi);
        Ok(self.blocks.iter().map(|b| s.dot(b)).collect())
    }
}

/// `Re(ρ_mn e^{i(n−m)φ})`.
fn rotated_real_part(rho: &DensityOperator, phi: f64) -> DMatrix<f64> {
    let m = rho.matrix();
    DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| {
        let (s, c) = ((b as f64 - a as f64) * phi).sin_cos();
        m[(a, b)].re * c - m[(a, b)].im * s
    })
}

/// The quadrature distribution `pr(x|φ) = ⟨x_φ|ρ|x_φ⟩`.
#[derive(Clone, Debug)]
pub struct QuadDensity {
    phi: f64,
    cutoff: usize,
    kernel: DMatrix<f64>,
}

impl QuadDensity {
    pub fn phase(&self) -> f64 {
        self.phi
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let psi = nalgebra::DVector::from_vec(hermite_functions(x, self.cutoff));
        (psi.transpose() * &self.kernel * &psi)[(0, 0)]
    }

    /// Mean and variance.
    pub fn moments(&self) -> (f64, f64) {
        let half = support_half_width(self.cutoff);
        let n = 8000;
        let h = 2.0 * half / n as f64;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let x = -half + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 } * h;
            let p = self.pdf(x) * w;
            m0 += p;
            m1 += p * x;
            m2 += p * x * x;
        }
        let mean = m1 / m0;
        (mean, m2 / m0 - mean * mean)
    }

    fn cdf_table(&self) -> (Vec<f64>, Vec<f64>) {
        let half = support_half_width(self.cutoff);
        let n = (2.0 * half / SAMPLING_STEP).ceil() as usize;
        let h = 2.0 * half / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| -half + i as f64 * h).collect();
        let pdf: Vec<f64> = xs.iter().map(|&x| self.pdf(x).max(0.0)).collect();
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        for i in 1..xs.len() {
            cdf.push(cdf[i - 1] + 0.5 * h * (pdf[i - 1] + pdf[i]));
        }
        let total = cdf[cdf.len() - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        (xs, cdf)
    }
}

/// Quadrature density of `rho` at LO phase `phi`.
pub fn quad_density(rho: &DensityOperator, phi: f64) -> Result<QuadDensity> {
    if rho.modes() != 1 {
        return Err(Error::ModeCount {
            expected: 1,
            got: rho.modes(),
        });
    }
    let tail = rho.tail_weight();
    if tail > DENSITY_TAIL_TOL {
        return Err(Error::Truncation {
            cutoff: rho.cutoff(),
            weight: tail,
        });
    }
    Ok(QuadDensity {
        phi,
        cutoff: rho.cutoff(),
        kernel: rotated_real_part(rho, phi),
    })
}

/// Draws `n_per_phase` i.i.d. quadratures at each phase by inverting the
/// cumulative distribution on a fine grid. Phase `i` uses its own ChaCha
/// stream derived from `(seed, i)`, so the record does not depend on
/// thread scheduling.
pub fn sample(rho: &DensityOperator, phases: &[f64], n_per_phase: usize, seed: u64) -> Result<QuadratureRecord> {
    let densities = phases
        .iter()
        .map(|&p| quad_density(rho, p))
        .collect::<Result<Vec<_>>>()?;
    let per_phase: Vec<Vec<(f64, f64)>> = densities
        .par_iter()
        .enumerate()
        .map(|(i, dens)| {
            let (xs, cdf) = dens.cdf_table();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (0..n_per_phase)
                .map(|_| {
                    let u: f64 = rng.random();
                    let k = cdf.partition_point(|&c| c < u).clamp(1, cdf.len() - 1);
                    let (c0, c1) = (cdf[k - 1], cdf[k]);
                    let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                    (dens.phase(), xs[k - 1] + t * (xs[k] - xs[k - 1]))
                })
                .collect()
        })
        .collect();
    QuadratureRecord::new(per_phase.into_iter().flatten().collect(), Some(seed))
}

/// `n` phases evenly spaced over `[0, π)`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * PI / n as f64).collect()
}

/// Histogram counts laid out for likelihood evaluation.
#[derive(Clone, Debug)]
pub(crate) struct BinnedData {
    pub phases: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
}

impl BinnedData {
    pub fn from_record(rec: &QuadratureRecord, binning: &Binning) -> Result<Self> {
        Self::from_histograms(&rec.histograms(binning)?, binning)
    }

    pub fn from_histograms(hists: &[Histogram], binning: &Binning) -> Result<Self> {
        if hists.is_empty() || hists.iter().all(|h| h.total() == 0) {
            return Err(Error::EmptyData("no quadrature counts".into()));
        }
        for h in hists {
            if !binning.matches(&h.edges) {
                return Err(Error::Binning(format!(
                    "histogram at phase {} does not match the model binning",
                    h.phase
                )));
            }
        }
        Ok(Self {
            phases: hists.iter().map(|h| h.phase).collect(),
            counts: hists.iter().map(|h| h.counts.clone()).collect(),
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// `−Σ f ln p` for the bin probabilities of `rho`.
    pub fn nll(&self, proj: &BinProjectors, rho: &DensityOperator) -> Result<f64> {
        let mut acc = 0.0;
        for (phi, counts) in self.phases.iter().zip(&self.counts) {
            acc += nll_of(counts, &proj.probabilities(rho, *phi)?);
        }
        Ok(acc)
    }
}

pub(crate) fn nll_of(counts: &[u64], probs: &[f64]) -> f64 {
    counts
        .iter()
        .zip(probs)
        .filter(|(c, _)| **c > 0)
        .map(|(&c, &p)| -(c as f64) * p.max(1e-300).ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockKet;
    use crate::states;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn pure(k: &FockKet) -> DensityOperator {
        DensityOperator::pure(k).unwrap()
    }

    fn sample_variance(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let cutoff = 30;
        let n = 6000;
        let h = 24.0 / n as f64;
        let mut gram = DMatrix::<f64>::zeros(cutoff + 1, cutoff + 1);
        for i in 0..=n {
            let x = -12.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 } * h;
            let psi = hermite_functions(x, cutoff);
            for a in 0..=cutoff {
                for b in 0..=cutoff {
                    gram[(a, b)] += w * psi[a] * psi[b];
                }
            }
        }
        assert!((gram - DMatrix::identity(cutoff + 1, cutoff + 1)).amax() < 1e-10);
    }

    #[test]
    fn vacuum_density() {
        let vac = pure(&FockKet::vacuum(10).unwrap());
        let d = quad_density(&vac, 0.7).unwrap();
        for x in [-2.0, -0.3, 0.0, 1.1] {
            assert_abs_diff_eq!(d.pdf(x), (-x * x).exp() / PI.sqrt(), epsilon = 1e-14);
        }
        let (mean, var) = d.moments();
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn squeezed_and_single_photon_densities() {
        let sv = pure(&states::squeezed_vacuum(0.5, 30).unwrap());
        assert_abs_diff_eq!(quad_density(&sv, 0.0).unwrap().moments().1, 0.25, epsilon = 1e-6);
        assert_abs_diff_eq!(quad_density(&sv, FRAC_PI_2).unwrap().moments().1, 1.0, epsilon = 1e-6);
        let one = pure(&FockKet::basis(6, 1).unwrap());
        for phi in [0.0, 0.4, 2.0] {
            assert!(quad_density(&one, phi).unwrap().pdf(0.0).abs() < 1e-16);
        }
    }

    #[test]
    fn phase_shift_by_pi_mirrors_density() {
        let rho = pure(&states::cat_state(0.9, 20, crate::states::BlochPoint::new(1.0, 0.7)).unwrap());
        let (a, b) = (quad_density(&rho, 0.4).unwrap(), quad_density(&rho, 0.4 + PI).unwrap());
        for x in [-1.7, -0.2, 0.5, 2.2] {
            assert_abs_diff_eq!(a.pdf(-x), b.pdf(x), epsilon = 1e-10);
        }
    }

    #[test]
    fn coherent_density_is_displaced() {
        // x_φ = x cos φ + p sin φ; ⟨x⟩ = √2 Re α, ⟨p⟩ = √2 Im α
        let c = pure(&states::coherent(1.0, 25).unwrap());
        assert_abs_diff_eq!(quad_density(&c, 0.0).unwrap().moments().0, 2f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(quad_density(&c, FRAC_PI_2).unwrap().moments().0, 0.0, epsilon = 1e-9);
        let ic = pure(&states::coherent(1.0, 25).unwrap().rotated(FRAC_PI_2).unwrap());
        assert_abs_diff_eq!(
            quad_density(&ic, FRAC_PI_2).unwrap().moments().0,
            2f64.sqrt(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn truncated_state_is_rejected() {
        let k = FockKet::basis(8, 8).unwrap();
        assert!(matches!(quad_density(&pure(&k), 0.0), Err(Error::Truncation { .. })));
    }

    #[test]
    fn bin_probabilities_sum_to_one_and_match_pdf() {
        let binning = Binning::default();
        let proj = BinProjectors::new(binning, 20);
        let rho = pure(&states::squeezed_photon(0.5, 20).unwrap());
        for phi in [0.0, 1.0, FRAC_PI_2] {
            let p = proj.probabilities(&rho, phi).unwrap();
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
            assert!(p.iter().all(|&v| v >= -1e-15));
            let d = quad_density(&rho, phi).unwrap();
            let k = 30;
            let (lo, hi) = (binning.edges()[k], binning.edges()[k + 1]);
            let n = 200;
            let h = (hi - lo) / n as f64;
            let direct: f64 = (0..n).map(|i| d.pdf(lo + (i as f64 + 0.5) * h) * h).sum();
            assert_abs_diff_eq!(p[k], direct, epsilon = 1e-7);
        }
    }

    #[test]
    fn vacuum_samples_have_half_variance() {
        let vac = pure(&FockKet::vacuum(10).unwrap());
        let rec = sample(&vac, &[0.0], 100_000, 7).unwrap();
        let xs: Vec<f64> = rec.samples().iter().map(|s| s.1).collect();
        assert_abs_diff_eq!(sample_variance(&xs), 0.5, epsilon = 0.01);
    }

    #[test]
    fn sampling_is_deterministic() {
        let rho = pure(&states::squeezed_vacuum(0.5, 20).unwrap());
        let phases = uniform_phases(6);
        let a = sample(&rho, &phases, 500, 42).unwrap();
        let b = sample(&rho, &phases, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = sample(&rho, &phases, 500, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn squeezed_sample_variance_ratio() {
        let rho = pure(&states::squeezed_vacuum(0.5, 30).unwrap());
        let rec = sample(&rho, &[0.0, FRAC_PI_2], 50_000, 11).unwrap();
        let groups = rec.phase_groups();
        let ratio = sample_variance(&groups[1].1) / sample_variance(&groups[0].1);
        assert!((ratio / 4.0 - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn record_folds_phases() {
        let rec = QuadratureRecord::new(vec![(PI + 0.3, 1.0), (-0.2, 2.0), (2.0 * PI, 0.5)], None).unwrap();
        let s = rec.samples();
        assert_abs_diff_eq!(s[0].0, 0.3, epsilon = 1e-12);
        assert_eq!(s[0].1, -1.0);
        assert_abs_diff_eq!(s[1].0, PI - 0.2, epsilon = 1e-12);
        assert_eq!(s[1].1, -2.0);
        assert_eq!(s[2], (0.0, 0.5));
        assert!(QuadratureRecord::new(vec![(0.0, f64::NAN)], None).is_err());
    }

    #[test]
    fn csv_round_trips() {
        let rec = QuadratureRecord::new(vec![(0.0, 1.25), (0.5, -0.75), (0.5, 3.5)], None).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("phase_rad,quadrature\n"));
        assert_eq!(QuadratureRecord::read_csv(buf.as_slice()).unwrap(), rec);
        assert!(QuadratureRecord::read_csv("a,b\n1,2\n".as_bytes()).is_err());

        let binning = Binning::new(-2.0, 2.0, 4).unwrap();
        let hists = rec.histograms(&binning).unwrap();
        assert_eq!(hists[1].counts, vec![0, 1, 0, 1]);
        assert!(hists
            .iter()
            .all(|h| h.total() as usize == rec.phase_groups().iter().find(|g| g.0 == h.phase).unwrap().1.len()));
        let mut buf = Vec::new();
        write_histograms_csv(&hists, &mut buf).unwrap();
        let back = read_histograms_csv(buf.as_slice()).unwrap();
        assert_eq!(back, hists);
        assert_eq!(back[0].binning().unwrap(), binning);
    }

    #[test]
    fn empty_record_has_no_histograms() {
        let rec = QuadratureRecord::new(vec![], None).unwrap();
        assert!(matches!(rec.histograms(&Binning::default()), Err(Error::EmptyData(_))));
    }
}
