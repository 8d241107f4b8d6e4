use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{BinProjectors, BinnedData, Binning, QuadratureRecord};
use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityOperator, C64};
use crate::states::DEFAULT_CUTOFF;

const MAX_HALVINGS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    pub cutoff: usize,
    pub max_iterations: usize,
    /// Stop once one iteration gains less log-likelihood than this.
    pub tol: f64,
    pub binning: Binning,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            max_iterations: 3000,
            tol: 1e-7,
            binning: Binning::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub state: DensityOperator,
    /// Log-likelihood before the first and after every accepted iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem {
    counts: Vec<Vec<f64>>,
    total: f64,
    /// `e^{i(n−m)φ_j}` split into real and imaginary parts.
    phase_re: Vec<DMatrix<f64>>,
    phase_im: Vec<DMatrix<f64>>,
    blocks: Vec<DMatrix<f64>>,
}

impl Problem {
    fn probabilities(&self, rho: &CMatrix, j: usize) -> Vec<f64> {
        let s = DMatrix::from_fn(rho.nrows(), rho.ncols(), |a, b| {
            rho[(a, b)].re * self.phase_re[j][(a, b)] - rho[(a, b)].im * self.phase_im[j][(a, b)]
        });
        self.blocks.iter().map(|b| s.dot(b)).collect()
    }

    fn log_likelihood(&self, rho: &CMatrix) -> f64 {
        let per_phase: Vec<f64> = (0..self.counts.len())
            .into_par_iter()
            .map(|j| {
                self.counts[j]
                    .iter()
                    .zip(self.probabilities(rho, j))
                    .filter(|(f, _)| **f > 0.0)
                    .map(|(f, p)| f * p.max(1e-300).ln())
                    .sum()
            })
            .collect();
        per_phase.iter().sum()
    }

    /// `R = (1/N) Σ_jk f_jk/p_jk Π_jk`.
    fn r_operator(&self, rho: &CMatrix) -> CMatrix {
        let d = rho.nrows();
        let per_phase: Vec<CMatrix> = (0..self.counts.len())
            .into_par_iter()
            .map(|j| {
                let p = self.probabilities(rho, j);
                let mut w = DMatrix::<f64>::zeros(d, d);
                for (k, b) in self.blocks.iter().enumerate() {
                    let f = self.counts[j][k];
                    if f > 0.0 {
                        w += b * (f / p[k].max(1e-300));
                    }
                }
                CMatrix::from_fn(d, d, |a, c| {
                    C64::new(
                        w[(a, c)] * self.phase_re[j][(a, c)],
                        w[(a, c)] * -self.phase_im[j][(a, c)],
                    )
                })
            })
            .collect();
        let mut r = CMatrix::zeros(d, d);
        for m in per_phase {
            r += m;
        }
        r / C64::from(self.total)
    }
}

fn normalized(m: CMatrix) -> CMatrix {
    let h = (&m + m.adjoint()) * C64::from(0.5);
    let tr = h.trace().re;
    h / C64::from(tr)
}

/// Iterative maximum-likelihood reconstruction from binned homodyne data
/// (`ρ ← RρR`, diluted when a full step would lower the likelihood).
pub fn mle_reconstruct(rec: &QuadratureRecord, opts: &MleOptions) -> Result<Reconstruction> {
    let data = BinnedData::from_record(rec, &opts.binning)?;
    if data.phases.len() < 2 {
        return Err(Error::DegeneratePhases(format!(
            "reconstruction needs at least two distinct phases, got {}",
            data.phases.len()
        )));
    }
    let proj = BinProjectors::new(opts.binning, opts.cutoff);
    let d = opts.cutoff + 1;
    let factor = |phi: f64, f: fn(f64) -> f64| DMatrix::from_fn(d, d, |a, b| f((b as f64 - a as f64) * phi));
    let problem = Problem {
        counts: data
            .counts
            .iter()
            .map(|c| c.iter().map(|&v| v as f64).collect())
            .collect(),
        total: data.total() as f64,
        phase_re: data.phases.iter().map(|&p| factor(p, f64::cos)).collect(),
        phase_im: data.phases.iter().map(|&p| factor(p, f64::sin)).collect(),
        blocks: proj.blocks().to_vec(),
    };

    let id = CMatrix::identity(d, d);
    let mut rho = id.clone() / C64::from(d as f64);
    let mut ll = problem.log_likelihood(&rho);
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let r = problem.r_operator(&rho);
        let mut step = None;
        let full = normalized(&r * &rho * &r);
        let full_ll = problem.log_likelihood(&full);
        if full_ll >= ll {
            step = Some((full, full_ll));
        } else {
            let mut eps = 1.0;
            for _ in 0..MAX_HALVINGS {
                let g = &id + &r * C64::from(eps);
                let cand = normalized(&g * &rho * &g);
                let cand_ll = problem.log_likelihood(&cand);
                if cand_ll >= ll {
                    step = Some((cand, cand_ll));
                    break;
                }
                eps *= 0.5;
            }
        }
        let Some((next, next_ll)) = step else {
            // no ascent direction left at machine precision
            converged = true;
            break;
        };
        iterations += 1;
        let gain = next_ll - ll;
        assert!(gain >= 0.0, "log-likelihood decreased by {}", -gain);
        rho = next;
        ll = next_ll;
        history.push(ll);
        if gain < opts.tol {
            converged = true;
            break;
        }
    }
    let state = DensityOperator::from_matrix(opts.cutoff, 1, rho)?;
    Ok(Reconstruction {
        state,
        log_likelihood: history,
        iterations,
        converged,
    })
}
