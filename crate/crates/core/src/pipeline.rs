//! Run configuration, the end-to-end fit-then-predict pipeline and figure
//! data emission.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{double_subtraction, gate, GateParams};
use crate::characterization::{
    bloch_sweep, cat_adequacy_curve, characterize, optimal_alpha, xi_sweep, AlphaFit, BlochGrid, MapPreset,
};
use crate::error::{Error, Result, StageExt};
use crate::homodyne::{
    fit_squeezer, fit_xi, mle_reconstruct, predict_and_compare, quad_density, sample, uniform_phases,
    write_histograms_csv, Binning, Comparison, FitOptions, MleOptions, QuadratureRecord,
};
use crate::states::{gaussian_model_state, CatQubitSpec, SqueezerModel, DEFAULT_CUTOFF, TWO_MODE_CUTOFF};

/// Named output sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Synthetic fit-then-predict run with histograms of the final output.
    Fig2Pipeline,
    Fig3(MapPreset),
    /// Entangled fidelity against modal purity.
    Fig4,
    /// Cat-qubit adequacy against amplitude.
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig2Pipeline,
        Preset::Fig3(MapPreset::A),
        Preset::Fig3(MapPreset::B),
        Preset::Fig3(MapPreset::C),
        Preset::Fig3(MapPreset::D),
        Preset::Fig4,
        Preset::Fig5,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "fig2-pipeline" | "fig2" => Ok(Preset::Fig2Pipeline),
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            n if n.starts_with("fig3") && n.len() == 5 => Ok(Preset::Fig3(MapPreset::parse(n)?)),
            _ => Err(Error::Unknown {
                kind: "preset",
                name: name.to_string(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2Pipeline => "fig2-pipeline",
            Preset::Fig3(m) => m.label(),
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }
}

/// Everything a run depends on. Flat keys, so a config file is a list of
/// `key = value` lines; absent keys take the defaults below.
///
/// The source model `(s, h)` and `η = 1` defaults are synthetic
/// assumptions, not measured values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub cutoff: usize,
    #[serde(rename = "T")]
    pub transmissivity: f64,
    pub xi: f64,
    pub kappa: f64,
    pub eta: f64,
    pub s: f64,
    pub h: f64,
    pub alpha: f64,
    pub seed: u64,
    /// LO phases of the tomography and fit stages; evenly spaced when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    pub n_phases: usize,
    pub samples_per_phase: usize,
    /// Phases and samples of the final output histograms.
    pub compare_phases: usize,
    pub compare_samples_per_phase: usize,
    pub mle_iterations: usize,
    pub grid_theta: usize,
    pub grid_phi: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Fig2Pipeline.name().to_string(),
            cutoff: DEFAULT_CUTOFF,
            transmissivity: 0.9,
            xi: 0.83,
            kappa: 1.0,
            eta: 1.0,
            s: 0.55,
            h: 1.01,
            alpha: 0.92,
            seed: 7,
            phases: None,
            n_phases: 12,
            samples_per_phase: 10_000,
            compare_phases: 6,
            compare_samples_per_phase: 10_000,
            mle_iterations: 3000,
            grid_theta: 37,
            grid_phi: 72,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn for_preset(preset: Preset) -> Self {
        let mut cfg = Self {
            preset: preset.name().to_string(),
            ..Self::default()
        };
        if let Preset::Fig3(m) = preset {
            let (alpha, p) = m.params();
            cfg.alpha = alpha;
            cfg.transmissivity = p.transmissivity;
            cfg.xi = p.xi;
        }
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn preset(&self) -> Result<Preset> {
        Preset::parse(&self.preset)
    }

    pub fn validate(&self) -> Result<()> {
        self.preset()?;
        self.gate_params().validate()?;
        self.squeezer()?;
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha", format!("{} (must be > 0)", self.alpha)));
        }
        if self.samples_per_phase == 0 || self.compare_samples_per_phase == 0 {
            return Err(Error::param("samples_per_phase", "must be positive"));
        }
        if self.phase_list().len() < 2 || self.compare_phases < 1 {
            return Err(Error::param("n_phases", "need at least two tomography phases"));
        }
        BlochGrid::new(self.grid_theta, self.grid_phi)?;
        Ok(())
    }

    pub fn gate_params(&self) -> GateParams {
        GateParams {
            transmissivity: self.transmissivity,
            xi: self.xi,
            kappa: self.kappa,
            eta: self.eta,
            cutoff: self.cutoff,
        }
    }

    pub fn squeezer(&self) -> Result<SqueezerModel> {
        SqueezerModel::new(self.s, self.h)
    }

    pub fn cat_spec(&self) -> Result<CatQubitSpec> {
        CatQubitSpec::new(self.alpha, self.cutoff)
    }

    pub fn grid(&self) -> Result<BlochGrid> {
        BlochGrid::new(self.grid_theta, self.grid_phi)
    }

    pub fn phase_list(&self) -> Vec<f64> {
        self.phases.clone().unwrap_or_else(|| uniform_phases(self.n_phases))
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            cutoff: self.cutoff,
            ..FitOptions::default()
        }
    }
}

/// Fitted parameters and the χ² of the final comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub s: f64,
    pub h: f64,
    pub xi: f64,
    pub chi2_per_phase: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub fit: FitReport,
    /// Source model from the phase-variance law, before likelihood refinement.
    pub squeezer_initial: SqueezerModel,
    pub mle_iterations: usize,
    pub mle_log_likelihood: f64,
    pub mle_purity: f64,
    pub mle_mean_photon_number: f64,
    /// Best-matching odd cat for the modelled squeezed photon.
    pub optimal_alpha: AlphaFit,
    pub comparison: Comparison,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_record(dir: &Path, stem: &str, rec: &QuadratureRecord, binning: &Binning) -> Result<()> {
    rec.write_csv(create(dir, &format!("{stem}_quadratures.csv"))?)?;
    write_histograms_csv(
        &rec.histograms(binning)?,
        create(dir, &format!("{stem}_histograms.csv"))?,
    )
}

/// Model quadrature densities on a fine grid: `phase_rad,x,density`.
pub fn write_density_curves<W: Write>(
    rho: &crate::fock::DensityOperator,
    phases: &[f64],
    binning: &Binning,
    w: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["phase_rad", "x", "density"])?;
    let n = 4 * binning.bins;
    for &phi in phases {
        let d = quad_density(rho, phi)?;
        for i in 0..=n {
            let x = binning.lo + (binning.hi - binning.lo) * i as f64 / n as f64;
            out.write_record([phi.to_string(), x.to_string(), d.pdf(x).to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Synthetic run of the two-stage protocol:
///
/// 1. sample the source model and reconstruct it by maximum likelihood;
/// 2. fit `(s, h)` to the source histograms;
/// 3. sample the heralded squeezed photon and fit `ξ` with `(s, h, T, η)` frozen;
/// 4. predict the second subtraction from the fitted model alone and score
///    it against sampled output data.
///
/// When `out` is given every intermediate artifact is written there.
pub fn run_pipeline(cfg: &RunConfig, out: Option<&Path>) -> Result<PipelineReport> {
    cfg.validate().stage("config")?;
    let binning = Binning::default();
    let truth_p = cfg.gate_params();
    let phases = cfg.phase_list();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(Error::from).stage("output")?;
        // the output location is not part of the result
        let saved = RunConfig {
            out_dir: None,
            ..cfg.clone()
        };
        fs::write(dir.join("run_config.toml"), saved.to_toml_string()?)
            .map_err(Error::from)
            .stage("output")?;
    }

    let rho0 = gaussian_model_state(&cfg.squeezer()?, cfg.cutoff).stage("source model")?;
    let rec0 = sample(&rho0, &phases, cfg.samples_per_phase, cfg.seed).stage("source sampling")?;
    let mle = mle_reconstruct(
        &rec0,
        &MleOptions {
            cutoff: cfg.cutoff,
            max_iterations: cfg.mle_iterations,
            binning,
            ..MleOptions::default()
        },
    )
    .stage("tomography")?;
    let squeezer = fit_squeezer(&rec0, &cfg.fit_options()).stage("squeezer fit")?;

    let rho1 = gate(&rho0, &truth_p).stage("squeezed photon model")?;
    let rec1 =
        sample(&rho1, &phases, cfg.samples_per_phase, cfg.seed.wrapping_add(1)).stage("squeezed photon sampling")?;
    let xi = fit_xi(&rec1, &squeezer.model, cfg.transmissivity, cfg.eta, &cfg.fit_options()).stage("xi fit")?;

    let fitted = GateParams { xi: xi.xi, ..truth_p };
    let model0 = gaussian_model_state(&squeezer.model, cfg.cutoff).stage("fitted source")?;
    let model1 = gate(&model0, &fitted).stage("fitted squeezed photon")?;
    let alpha = optimal_alpha(&model1).stage("optimal alpha")?;

    let compare_phases = uniform_phases(cfg.compare_phases);
    let rho2 = double_subtraction(&rho0, &truth_p, &truth_p).stage("output model")?;
    let rec2 = sample(
        &rho2,
        &compare_phases,
        cfg.compare_samples_per_phase,
        cfg.seed.wrapping_add(2),
    )
    .stage("output sampling")?;
    let comparison = predict_and_compare(&model1, &fitted, &rec2, &binning).stage("prediction")?;

    let report = PipelineReport {
        fit: FitReport {
            s: squeezer.model.s,
            h: squeezer.model.h,
            xi: xi.xi,
            chi2_per_phase: comparison.chi2_per_phase.clone(),
        },
        squeezer_initial: squeezer.initial,
        mle_iterations: mle.iterations,
        mle_log_likelihood: *mle.log_likelihood.last().expect("initial likelihood"),
        mle_purity: mle.state.purity(),
        mle_mean_photon_number: mle.state.mean_photon_number(),
        optimal_alpha: alpha,
        comparison,
    };

    if let Some(dir) = out {
        let emit = || -> Result<()> {
            write_record(dir, "source", &rec0, &binning)?;
            mle.state.write_json(create(dir, "source_mle.json")?)?;
            write_record(dir, "squeezed_photon", &rec1, &binning)?;
            write_record(dir, "output", &rec2, &binning)?;
            let predicted = gate(&model1, &fitted)?;
            write_density_curves(
                &predicted,
                &compare_phases,
                &binning,
                create(dir, "output_predicted.csv")?,
            )?;
            serde_json::to_writer_pretty(create(dir, "fit_report.json")?, &report.fit)?;
            serde_json::to_writer_pretty(create(dir, "pipeline_report.json")?, &report)?;
            Ok(())
        };
        emit().stage("output")?;
    }
    Ok(report)
}

/// Writes the data behind one preset and returns the files written.
pub fn emit_figure(preset: Preset, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    match preset {
        Preset::Fig2Pipeline => {
            let dir = out.join(preset.name());
            run_pipeline(cfg, Some(&dir))?;
            written.push(dir);
        }
        Preset::Fig3(m) => {
            let (alpha, p) = m.params();
            let p = GateParams {
                cutoff: cfg.cutoff,
                kappa: cfg.kappa,
                eta: cfg.eta,
                ..p
            };
            let map = bloch_sweep(&CatQubitSpec::new(alpha, cfg.cutoff)?, &p, &cfg.grid()?)?;
            let path = out.join(format!("{}.csv", preset.name()));
            map.write_csv(create(out, &format!("{}.csv", preset.name()))?)?;
            written.push(path);
            let report = characterize(alpha, &p, &cfg.grid()?)?;
            let path = out.join(format!("{}_report.json", preset.name()));
            serde_json::to_writer_pretty(create(out, &format!("{}_report.json", preset.name()))?, &report)?;
            written.push(path);
        }
        Preset::Fig4 => {
            let spec = CatQubitSpec::new(cfg.alpha, TWO_MODE_CUTOFF.max(cfg.cutoff))?;
            let xis: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
            let curve = xi_sweep(&spec, &cfg.gate_params(), &xis)?;
            curve.write_csv(create(out, "fig4.csv")?)?;
            written.push(out.join("fig4.csv"));
        }
        Preset::Fig5 => {
            let alphas: Vec<f64> = (1..=150).map(|k| k as f64 / 50.0).collect();
            let curve = cat_adequacy_curve(&alphas)?;
            curve.write_csv(create(out, "fig5.csv")?)?;
            written.push(out.join("fig5.csv"));
        }
    }
    Ok(written)
}
