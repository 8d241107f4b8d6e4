use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use catgate::channel::double_subtraction;
use catgate::characterization::{
    bloch_sweep, cat_adequacy, cat_adequacy_alternate_form, cat_adequacy_closed_form, cat_adequacy_curve,
    entangled_branch_fidelities, EntangledTarget,
};
use catgate::homodyne::{
    fit_squeezer, fit_xi, mle_reconstruct, sample, write_histograms_csv, Binning, FitOptions, MleOptions,
    QuadratureRecord,
};
use catgate::pipeline::{emit_figure, run_pipeline, Preset, RunConfig};
use catgate::states::{
    cat_state, coherent, gaussian_model_state, squeezed_photon, squeezed_vacuum, BellKind, BlochPoint, Parity,
};
use catgate::{gate, wigner, DensityOperator, Error, FockKet, GridSpec, Result};

const OUT_ENV: &str = "CATGATE_OUT";
const DEFAULT_OUT: &str = "catgate-out";

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Photon-subtraction phase gate on cat qubits: simulation, homodyne
/// tomography and model characterization.
#[derive(Parser)]
#[command(name = "catgate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a named state and write it as JSON, optionally with its Wigner function.
    State(StateArgs),
    /// Sample homodyne quadratures from a model state.
    SimulateHomodyne(SimulateArgs),
    /// Maximum-likelihood reconstruction from a quadrature CSV.
    Tomo(TomoArgs),
    /// Fit the source model and the modal purity to quadrature CSVs.
    Fit(FitArgs),
    /// Synthetic fit-then-predict run with all intermediate artifacts.
    Pipeline(RunArgs),
    /// Fidelity map over the Bloch sphere of cat qubits.
    SweepBloch(SweepArgs),
    /// Fidelity of the gate acting on one arm of an entangled cat pair.
    EntangledFidelity(EntangledArgs),
    /// Fidelity between ideal gate outputs and cat-qubit states.
    CatAdequacy(AdequacyArgs),
    /// Write the data behind a named output set (or `all`).
    Figures(FiguresArgs),
}

/// Run configuration: a preset or config file, then flag overrides.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Flat TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset used when no config file is given.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory [env: CATGATE_OUT; default: catgate-out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cutoff: Option<usize>,
    /// Beamsplitter transmissivity.
    #[arg(long = "T", allow_negative_numbers = true)]
    transmissivity: Option<f64>,
    /// Modal purity.
    #[arg(long, allow_negative_numbers = true)]
    xi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// Squeezing factor (variance ratio to shot noise).
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    /// Parasite gain.
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    /// Cat amplitude.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::for_preset(Preset::parse(name)?),
            (None, None) => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$target = v; })*
            };
        }
        set!(cutoff => cutoff, transmissivity => transmissivity, xi => xi, kappa => kappa, eta => eta,
             s => s, h => h, alpha => alpha, seed => seed);
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Flag, then config file, then environment, then `catgate-out`.
fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[derive(Clone, Copy, ValueEnum)]
enum StateName {
    Vacuum,
    Fock,
    Coherent,
    Cat,
    SqueezedVacuum,
    SqueezedPhoton,
    /// Squeezed thermal state of the `(s, h)` source model.
    Source,
    /// Source model after one gate.
    Subtracted,
    /// Source model after two gates.
    DoubleSubtracted,
}

#[derive(Args)]
struct StateArgs {
    name: StateName,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Bloch polar angle of a cat state.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    theta: f64,
    /// Bloch azimuth of a cat state.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    phi: f64,
    /// Photon number of a Fock state.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Also write the Wigner function on a square grid.
    #[arg(long)]
    wigner: bool,
    #[arg(long, default_value_t = 5.0)]
    wigner_half_width: f64,
    #[arg(long, default_value_t = 101)]
    wigner_points: usize,
}

enum Built {
    Ket(FockKet),
    Mixed(DensityOperator),
}

fn cmd_state(args: &StateArgs) -> Result<Value> {
    let cfg = args.cfg.resolve_state()?;
    let c = cfg.cutoff;
    let built = match args.name {
        StateName::Vacuum => Built::Ket(FockKet::vacuum(c)?),
        StateName::Fock => Built::Ket(FockKet::basis(c, args.n)?),
        StateName::Coherent => Built::Ket(coherent(cfg.alpha, c)?),
        StateName::Cat => Built::Ket(cat_state(cfg.alpha, c, BlochPoint::new(args.theta, args.phi))?),
        StateName::SqueezedVacuum => Built::Ket(squeezed_vacuum(cfg.s, c)?),
        StateName::SqueezedPhoton => Built::Ket(squeezed_photon(cfg.s, c)?),
        StateName::Source => Built::Mixed(gaussian_model_state(&cfg.squeezer()?, c)?),
        StateName::Subtracted => Built::Mixed(gate(&gaussian_model_state(&cfg.squeezer()?, c)?, &cfg.gate_params())?),
        StateName::DoubleSubtracted => {
            let p = cfg.gate_params();
            Built::Mixed(double_subtraction(&gaussian_model_state(&cfg.squeezer()?, c)?, &p, &p)?)
        }
    };
    let name = args
        .name
        .to_possible_value()
        .expect("named variant")
        .get_name()
        .to_string();
    let dir = out_dir(&cfg)?;
    let json_path = dir.join(format!("{name}.json"));
    let rho = match &built {
        Built::Ket(k) => {
            k.write_json(create(&json_path)?)?;
            DensityOperator::pure(k)?
        }
        Built::Mixed(r) => {
            r.write_json(create(&json_path)?)?;
            r.clone()
        }
    };
    let mut report = json!({
        "state": name,
        "cutoff": c,
        "json": json_path,
        "purity": rho.purity(),
        "mean_photon_number": rho.mean_photon_number(),
    });
    if let Built::Ket(k) = &built {
        let c0 = k.amplitudes()[0];
        report["c0"] = json!([c0.re, c0.im]);
    }
    if args.wigner {
        if args.wigner_points < 2 || args.wigner_half_width.is_nan() || args.wigner_half_width <= 0.0 {
            return Err(Error::Config(
                "wigner grid needs at least 2 points and a positive width".into(),
            ));
        }
        let grid = wigner(&rho, &GridSpec::symmetric(args.wigner_half_width, args.wigner_points))?;
        let path = dir.join(format!("{name}_wigner.csv"));
        grid.write_csv(create(&path)?)?;
        report["wigner"] = json!(path);
        report["wigner_max"] = json!(grid.max());
        report["wigner_integral"] = json!(grid.integral());
    }
    Ok(report)
}

impl ConfigArgs {
    /// Like `resolve`, but lets single-state commands use any amplitude and
    /// squeezing so their own constructors report bad values.
    fn resolve_state(&self) -> Result<RunConfig> {
        let base = ConfigArgs {
            alpha: None,
            s: None,
            ..self.clone()
        };
        let mut cfg = base.resolve()?;
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(s) = self.s {
            cfg.s = s;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelState {
    /// `(s, h)` squeezed thermal state.
    Source,
    /// Source after one gate.
    Subtracted,
    /// Source after two gates.
    DoubleSubtracted,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum, default_value_t = ModelState::Subtracted)]
    state: ModelState,
    /// Density or ket JSON to sample instead of a model state.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// File stem of the outputs.
    #[arg(long, default_value = "homodyne")]
    name: String,
}

fn read_state(path: &Path) -> Result<DensityOperator> {
    let v: Value = serde_json::from_reader(File::open(path)?)?;
    let is_matrix = v.get("re").and_then(|re| re.get(0)).is_some_and(Value::is_array);
    if is_matrix {
        DensityOperator::from_json_value(&serde_json::from_value(v)?)
    } else {
        DensityOperator::pure(&FockKet::from_json_value(&serde_json::from_value(v)?)?)
    }
}

fn model_state(cfg: &RunConfig, which: ModelState) -> Result<DensityOperator> {
    let rho0 = gaussian_model_state(&cfg.squeezer()?, cfg.cutoff)?;
    let p = cfg.gate_params();
    match which {
        ModelState::Source => Ok(rho0),
        ModelState::Subtracted => gate(&rho0, &p),
        ModelState::DoubleSubtracted => double_subtraction(&rho0, &p, &p),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Value> {
    let mut cfg = args.cfg.resolve()?;
    if let Some(n) = args.phases {
        cfg.n_phases = n;
        cfg.phases = None;
    }
    if let Some(n) = args.samples {
        cfg.samples_per_phase = n;
    }
    cfg.validate()?;
    let rho = match &args.input {
        Some(path) => read_state(path)?,
        None => model_state(&cfg, args.state)?,
    };
    let rec = sample(&rho, &cfg.phase_list(), cfg.samples_per_phase, cfg.seed)?;
    let dir = out_dir(&cfg)?;
    let quad = dir.join(format!("{}_quadratures.csv", args.name));
    let hist = dir.join(format!("{}_histograms.csv", args.name));
    rec.write_csv(create(&quad)?)?;
    write_histograms_csv(&rec.histograms(&Binning::default())?, create(&hist)?)?;
    Ok(json!({ "quadratures": quad, "histograms": hist, "samples": rec.len(), "seed": cfg.seed }))
}

fn read_record(path: &Path) -> Result<QuadratureRecord> {
    QuadratureRecord::read_csv(File::open(path)?)
}

#[derive(Args)]
struct TomoArgs {
    /// Quadrature CSV (`phase_rad,quadrature`).
    input: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value_t = 3000)]
    max_iterations: usize,
}

fn cmd_tomo(args: &TomoArgs) -> Result<Value> {
    let cfg = args.cfg.resolve()?;
    let rec = read_record(&args.input)?;
    let out = mle_reconstruct(
        &rec,
        &MleOptions {
            cutoff: cfg.cutoff,
            max_iterations: args.max_iterations,
            ..MleOptions::default()
        },
    )?;
    let dir = out_dir(&cfg)?;
    let path = dir.join("reconstruction.json");
    out.state.write_json(create(&path)?)?;
    Ok(json!({
        "reconstruction": path,
        "iterations": out.iterations,
        "converged": out.converged,
        "log_likelihood": out.log_likelihood.last(),
        "purity": out.state.purity(),
        "mean_photon_number": out.state.mean_photon_number(),
    }))
}

#[derive(Args)]
struct FitArgs {
    /// Quadrature CSV of the source state.
    source: PathBuf,
    /// Quadrature CSV of the subtracted state; fits the modal purity when given.
    subtracted: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Hold the parasite gain at this value.
    #[arg(long)]
    fixed_h: Option<f64>,
}

fn cmd_fit(args: &FitArgs) -> Result<Value> {
    let cfg = args.cfg.resolve()?;
    let opts = FitOptions {
        cutoff: cfg.cutoff,
        fixed_h: args.fixed_h,
        ..FitOptions::default()
    };
    let sq = fit_squeezer(&read_record(&args.source)?, &opts)?;
    let mut report = json!({ "s": sq.model.s, "h": sq.model.h, "nll": sq.nll });
    if let Some(path) = &args.subtracted {
        let xi = fit_xi(&read_record(path)?, &sq.model, cfg.transmissivity, cfg.eta, &opts)?;
        report["xi"] = json!(xi.xi);
    }
    let dir = out_dir(&cfg)?;
    let path = dir.join("fit_report.json");
    serde_json::to_writer_pretty(create(&path)?, &report)?;
    report["report"] = json!(path);
    Ok(report)
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

fn cmd_pipeline(args: &RunArgs) -> Result<Value> {
    let cfg = args.cfg.resolve()?;
    let dir = out_dir(&cfg)?;
    let report = run_pipeline(&cfg, Some(&dir))?;
    Ok(json!({
        "out": dir,
        "s": report.fit.s,
        "h": report.fit.h,
        "xi": report.fit.xi,
        "chi2_per_phase": report.fit.chi2_per_phase,
        "pooled_chi2": report.comparison.pooled_chi2,
        "optimal_alpha": report.optimal_alpha.alpha,
    }))
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    n_phi: Option<usize>,
}

fn cmd_sweep(args: &SweepArgs) -> Result<Value> {
    let mut cfg = args.cfg.resolve()?;
    cfg.grid_theta = args.n_theta.unwrap_or(cfg.grid_theta);
    cfg.grid_phi = args.n_phi.unwrap_or(cfg.grid_phi);
    let map = bloch_sweep(&cfg.cat_spec()?, &cfg.gate_params(), &cfg.grid()?)?;
    let dir = out_dir(&cfg)?;
    let path = dir.join(format!("bloch_{}.csv", cfg.preset));
    map.write_csv(create(&path)?)?;
    Ok(json!({ "map": path, "summary": map.summary() }))
}

#[derive(Clone, Copy, ValueEnum)]
enum Probe {
    PhiPlus,
    PsiPlus,
    General,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParityArg {
    Even,
    Odd,
}

#[derive(Args)]
struct EntangledArgs {
    #[arg(long, value_enum, default_value_t = Probe::PhiPlus)]
    probe: Probe,
    /// Second-arm parity paired with |+> in a general probe.
    #[arg(long, value_enum, default_value_t = ParityArg::Even)]
    mu: ParityArg,
    /// Relative phase of a general probe.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    phase: f64,
    #[command(flatten)]
    cfg: ConfigArgs,
}

fn cmd_entangled(args: &EntangledArgs) -> Result<Value> {
    let mut cfg = args.cfg.resolve()?;
    if args.cfg.cutoff.is_none() && args.cfg.config.is_none() {
        cfg.cutoff = catgate::states::TWO_MODE_CUTOFF;
    }
    let probe = match args.probe {
        Probe::PhiPlus => BellKind::PhiPlus,
        Probe::PsiPlus => BellKind::PsiPlus,
        Probe::General => BellKind::General {
            mu: match args.mu {
                ParityArg::Even => Parity::Even,
                ParityArg::Odd => Parity::Odd,
            },
            phi: args.phase,
        },
    };
    let spec = cfg.cat_spec()?;
    let p = cfg.gate_params();
    let sub = entangled_branch_fidelities(&spec, &p, probe, EntangledTarget::Subtracted)?;
    let flip = entangled_branch_fidelities(&spec, &p, probe, EntangledTarget::BitFlipped)?;
    Ok(json!({ "fidelity": sub.mixture, "subtracted": sub, "bit_flipped": flip, "cutoff": cfg.cutoff }))
}

#[derive(Args)]
struct AdequacyArgs {
    /// Amplitudes to evaluate; a curve on `[0.02, 3]` when omitted.
    #[arg(long = "at", num_args = 1..)]
    at: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_adequacy(args: &AdequacyArgs) -> Result<Value> {
    if args.at.is_empty() {
        let cfg = RunConfig {
            out_dir: args.out.clone(),
            ..RunConfig::default()
        };
        let alphas: Vec<f64> = (1..=150).map(|k| k as f64 / 50.0).collect();
        let curve = cat_adequacy_curve(&alphas)?;
        let path = out_dir(&cfg)?.join("cat_adequacy.csv");
        curve.write_csv(create(&path)?)?;
        return Ok(json!({ "curve": path }));
    }
    let rows = args
        .at
        .iter()
        .map(|&a| {
            Ok(json!({
                "alpha": a,
                "fidelity": cat_adequacy(a)?,
                "closed_form": cat_adequacy_closed_form(a),
                "alternate_form": cat_adequacy_alternate_form(a),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Value::Array(rows))
}

#[derive(Args)]
struct FiguresArgs {
    /// Preset name (fig2-pipeline, fig3a..fig3d, fig4, fig5) or `all`.
    #[arg(value_name = "PRESET")]
    which: String,
    #[command(flatten)]
    cfg: ConfigArgs,
}

fn cmd_figures(args: &FiguresArgs) -> Result<Value> {
    let presets: Vec<Preset> = if args.which == "all" {
        Preset::ALL.to_vec()
    } else {
        vec![Preset::parse(&args.which)?]
    };
    let mut written = Vec::new();
    for preset in presets {
        let base = ConfigArgs {
            preset: Some(preset.name().to_string()),
            ..args.cfg.clone()
        };
        let cfg = base.resolve()?;
        let dir = out_dir(&cfg)?;
        written.extend(emit_figure(preset, &cfg, &dir)?);
    }
    Ok(json!({ "written": written }))
}

fn run(cli: Cli) -> Result<Value> {
    match &cli.command {
        Command::State(a) => cmd_state(a),
        Command::SimulateHomodyne(a) => cmd_simulate(a),
        Command::Tomo(a) => cmd_tomo(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::SweepBloch(a) => cmd_sweep(a),
        Command::EntangledFidelity(a) => cmd_entangled(a),
        Command::CatAdequacy(a) => cmd_adequacy(a),
        Command::Figures(a) => cmd_figures(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(v) => {
            // a closed pipe downstream is not a failure of the run
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&v).expect("json value")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            })
        }
    }
}
