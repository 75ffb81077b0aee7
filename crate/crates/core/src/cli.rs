//! The `rabi` command-line front end.
//!
//! Data (CSV files, JSON summaries) goes to files and standard output;
//! diagnostics go to standard error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytic::{attractor_direction, euclidean_action};
use crate::config::RunConfig;
use crate::drive::DriveKind;
use crate::ensemble::{fit_alpha, run_ensemble, time_to_threshold, AlphaFit, EnsembleSummary};
use crate::hamiltonian::{effective_coupling_vector, Form, HamiltonianBuilder};
use crate::hilbert::{
    commutator_residuals, prepare_state, BlochVector, CavityPrep, CommutatorResiduals,
    FockTruncation,
};
use crate::integrator::evolve;
use crate::output::{
    analytic_rows, config_hash, fmt_f64, write_csv, write_trajectory_csv, ANALYTIC_COLUMNS,
};

pub const JSON_SCHEMA_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "RABI_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_LEAKAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "rabi", version, about = "Driven quantum Rabi model simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV plus a JSON summary.
    Simulate(SimulateArgs),
    /// Tabulate the closed-form solutions for one coupling strength.
    Analytic(AnalyticArgs),
    /// Run a seeded ensemble of random initial states.
    Ensemble(EnsembleArgs),
    /// Compare the predicted and simulated late-time Bloch direction under an elliptical drive.
    Steer(SteerArgs),
    /// Check the ladder-operator commutation relations on a truncated space.
    VerifyAlgebra(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// JSON run configuration. Without it the built-in default is used.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set drive.g0=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY.PATH=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum FormArg {
    FullRabi,
    Jc,
    AntiJc,
}

impl From<FormArg> for Form {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::FullRabi => Form::FullRabi,
            FormArg::Jc => Form::Jc,
            FormArg::AntiJc => Form::AntiJc,
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    /// `vacuum`, `fock:N` or `coherent:MEAN`.
    #[arg(long, default_value = "vacuum", value_parser = parse_cavity)]
    pub cavity: CavityPrep,
    #[arg(long, value_enum, default_value = "full-rabi")]
    pub form: FormArg,
}

#[derive(Args, Debug)]
pub struct AnalyticArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma_z0: f64,
    #[arg(long, default_value_t = 5.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 401)]
    pub n_points: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Worker threads; falls back to $RABI_WORKERS, then the core count.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SteerArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub eta: f64,
    /// Ellipse orientation Φ = (φx − φy)/2.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub orientation: f64,
    /// Trajectory length; defaults to 4 × 8/g0.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub theta0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi0: f64,
    #[arg(long, default_value = "coherent:1", value_parser = parse_cavity)]
    pub cavity: CavityPrep,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    /// Fock levels removed from the top before taking norms.
    #[arg(long, default_value_t = 2)]
    pub drop_top: usize,
}

pub fn parse_cavity(s: &str) -> Result<CavityPrep, String> {
    let s = s.trim();
    if s == "vacuum" {
        return Ok(CavityPrep::Vacuum);
    }
    if let Some(n) = s.strip_prefix("fock:") {
        return n
            .parse()
            .map(|n| CavityPrep::Fock { n })
            .map_err(|e| format!("fock level: {e}"));
    }
    if let Some(m) = s.strip_prefix("coherent:") {
        return m
            .parse()
            .map(|mean_photons| CavityPrep::Coherent { mean_photons })
            .map_err(|e| format!("coherent mean: {e}"));
    }
    Err(format!(
        "unknown cavity `{s}`; use vacuum, fock:N or coherent:MEAN"
    ))
}

fn load_config(args: &ConfigArgs) -> anyhow::Result<RunConfig> {
    let (text, origin) = match &args.config {
        Some(p) => (
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            p.display().to_string(),
        ),
        None => (
            RunConfig::default_text().to_string(),
            "<built-in>".to_string(),
        ),
    };
    let mut cfg =
        RunConfig::load(&text, &args.overrides).with_context(|| format!("loading {origin}"))?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.display().to_string();
    }
    Ok(cfg)
}

fn out_dir(dir: &str) -> anyhow::Result<PathBuf> {
    let p = PathBuf::from(dir);
    fs::create_dir_all(&p).with_context(|| format!("creating {}", p.display()))?;
    Ok(p)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, &s).with_context(|| format!("writing {}", path.display()))?;
    Ok(s)
}

fn print_line<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string(value)?)?;
    Ok(())
}

pub fn worker_count(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Some(n) = flag {
        if n == 0 {
            bail!("--workers must be >= 1");
        }
        return Ok(n);
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{WORKERS_ENV}={v}"))?;
        if n == 0 {
            bail!("{WORKERS_ENV} must be >= 1");
        }
        return Ok(n);
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Analytic(a) => cmd_analytic(a),
        Command::Ensemble(a) => cmd_ensemble(a),
        Command::Steer(a) => cmd_steer(a),
        Command::VerifyAlgebra(a) => cmd_verify_algebra(a),
    }
}

#[derive(Serialize)]
struct SimulateReport {
    schema_version: u32,
    config_hash: String,
    theta: f64,
    phi: f64,
    cavity: CavityPrep,
    form: Form,
    trusted: bool,
    max_leakage: f64,
    final_bloch: BlochVector,
    final_log_norm: f64,
    convergence_threshold: f64,
    time_to_threshold: Option<f64>,
    fit: Option<AlphaFit>,
    fit_error: Option<String>,
    trajectory_csv: String,
}

fn cmd_simulate(a: SimulateArgs) -> anyhow::Result<i32> {
    let cfg = load_config(&a.config)?;
    let hash = cfg.hash();
    let builder = HamiltonianBuilder::new(cfg.model, cfg.drive_spec(), a.form.into())?;
    let s0 = prepare_state(a.theta, a.phi, a.cavity, cfg.model.trunc())?;
    let rec = evolve(&s0, &builder, &cfg.integrator_config())?;

    let dir = out_dir(&cfg.output_dir)?;
    let csv_path = dir.join("trajectory.csv");
    let meta = [
        ("config_hash", hash.clone()),
        ("config", cfg.canonical_json()),
        ("theta", fmt_f64(a.theta)),
        ("phi", fmt_f64(a.phi)),
        ("cavity", serde_json::to_string(&a.cavity)?),
        ("form", serde_json::to_string(&builder.form())?),
        ("trusted", rec.trusted.to_string()),
    ];
    let f =
        fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    write_trajectory_csv(std::io::BufWriter::new(f), &rec, &meta)?;

    let sz = rec.sigma_z();
    let (fit, fit_error) = match fit_alpha(&rec) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = SimulateReport {
        schema_version: JSON_SCHEMA_VERSION,
        config_hash: hash,
        theta: a.theta,
        phi: a.phi,
        cavity: a.cavity,
        form: builder.form(),
        trusted: rec.trusted,
        max_leakage: rec.max_leakage(),
        final_bloch: *rec.bloch.last().expect("non-empty record"),
        final_log_norm: *rec.log_norm.last().expect("non-empty record"),
        convergence_threshold: cfg.ensemble.convergence_threshold,
        time_to_threshold: time_to_threshold(&rec.times, &sz, cfg.ensemble.convergence_threshold),
        fit,
        fit_error,
        trajectory_csv: csv_path.display().to_string(),
    };
    write_json(&dir.join("trajectory.json"), &report)?;
    print_line(&report)?;
    if rec.trusted {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "warning: leakage into the top Fock levels reached {:.3e}; raise n_max",
            report.max_leakage
        );
        Ok(EXIT_LEAKAGE)
    }
}

#[derive(Serialize)]
struct AnalyticReport {
    schema_version: u32,
    config_hash: String,
    alpha: f64,
    sigma_z0: f64,
    euclidean_action: f64,
    euclidean_action_quadrature: f64,
    analytic_csv: String,
}

fn cmd_analytic(a: AnalyticArgs) -> anyhow::Result<i32> {
    if !(a.alpha > 0.0) || !a.alpha.is_finite() {
        bail!("--alpha must be a finite number > 0, got {}", a.alpha);
    }
    if !(-1.0..=1.0).contains(&a.sigma_z0) {
        bail!("--sigma-z0 must lie in [-1, 1], got {}", a.sigma_z0);
    }
    if !(a.t_end > 0.0) || !a.t_end.is_finite() {
        bail!("--t-end must be a finite number > 0, got {}", a.t_end);
    }
    if a.n_points < 2 {
        bail!("--n-points must be >= 2");
    }
    let canonical = serde_json::json!({
        "command": "analytic", "alpha": a.alpha, "sigma_z0": a.sigma_z0, "t_end": a.t_end, "n_points": a.n_points,
    });
    let hash = config_hash(canonical.to_string().as_bytes());
    let action = euclidean_action(a.alpha)?;
    let rows = analytic_rows(a.alpha, a.sigma_z0, a.t_end, a.n_points)?;

    let dir = out_dir(&a.out.display().to_string())?;
    let csv_path = dir.join("analytic.csv");
    let meta = [
        ("config_hash", hash.clone()),
        ("alpha", fmt_f64(a.alpha)),
        ("sigma_z0", fmt_f64(a.sigma_z0)),
        ("S_E", fmt_f64(action.closed_form)),
    ];
    let f =
        fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    write_csv(std::io::BufWriter::new(f), &meta, &ANALYTIC_COLUMNS, rows)?;
    print_line(&AnalyticReport {
        schema_version: JSON_SCHEMA_VERSION,
        config_hash: hash,
        alpha: a.alpha,
        sigma_z0: a.sigma_z0,
        euclidean_action: action.closed_form,
        euclidean_action_quadrature: action.quadrature,
        analytic_csv: csv_path.display().to_string(),
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
pub struct SummaryFile<'a> {
    pub config_hash: &'a str,
    #[serde(flatten)]
    pub summary: &'a EnsembleSummary,
}

#[derive(Serialize)]
struct EnsembleLine<'a> {
    schema_version: u32,
    config_hash: &'a str,
    n_samples: usize,
    n_trusted: usize,
    n_converged: usize,
    fraction_converged: f64,
    median_time_to_threshold: Option<f64>,
    reference_time_to_threshold: Option<f64>,
    envelope_violations: usize,
    summary_json: String,
}

fn cmd_ensemble(a: EnsembleArgs) -> anyhow::Result<i32> {
    let cfg = load_config(&a.config)?;
    let workers = worker_count(a.workers)?;
    let spec = cfg.ensemble_spec();
    spec.validate()?;
    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
    let hash = cfg.hash();
    let run = run_ensemble(&spec, workers)?;

    let dir = out_dir(&cfg.output_dir)?;
    let summary_path = dir.join("summary.json");
    write_json(
        &summary_path,
        &SummaryFile {
            config_hash: &hash,
            summary: &run.summary,
        },
    )?;

    let meta = |label: String| vec![("config_hash", hash.clone()), ("trajectory", label)];
    let f = fs::File::create(dir.join("reference.csv"))?;
    write_trajectory_csv(
        std::io::BufWriter::new(f),
        &run.reference,
        &meta("reference theta=0 vacuum".into()),
    )?;
    if !run.retained.is_empty() {
        let tdir = dir.join("trajectories");
        fs::create_dir_all(&tdir)?;
        let stride = cfg.ensemble.decimate.max(1);
        for (i, rec) in &run.retained {
            let f = fs::File::create(tdir.join(format!("sample_{i:05}.csv")))?;
            write_trajectory_csv(
                std::io::BufWriter::new(f),
                &rec.decimated(stride),
                &meta(format!("sample {i}")),
            )?;
        }
    }

    let s = &run.summary;
    print_line(&EnsembleLine {
        schema_version: JSON_SCHEMA_VERSION,
        config_hash: &hash,
        n_samples: s.n_samples,
        n_trusted: s.n_trusted,
        n_converged: s.n_converged,
        fraction_converged: s.fraction_converged,
        median_time_to_threshold: s.median_time_to_threshold,
        reference_time_to_threshold: s.reference.time_to_threshold,
        envelope_violations: s.envelope_violations,
        summary_json: summary_path.display().to_string(),
    })?;
    if s.n_untrusted > 0 {
        eprintln!(
            "warning: {} trajectories flagged for leakage or failed",
            s.n_untrusted
        );
    }
    Ok(if s.n_trusted > 0 && s.n_converged == s.n_trusted {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Serialize)]
struct SteerReport {
    schema_version: u32,
    config_hash: String,
    eta: f64,
    orientation: f64,
    predicted_attractor: BlochVector,
    measured_attractor: BlochVector,
    angular_error: f64,
    mean_bloch_length: f64,
    trusted: bool,
    t_end: f64,
}

fn cmd_steer(a: SteerArgs) -> anyhow::Result<i32> {
    if !(a.eta >= 0.0) || !a.eta.is_finite() {
        bail!("--eta must be a finite number >= 0, got {}", a.eta);
    }
    let mut cfg = load_config(&a.config)?;
    cfg.drive.kind = DriveKind::Elliptical;
    cfg.drive.eta = a.eta;
    cfg.drive.phi_x = a.orientation;
    cfg.drive.phi_y = -a.orientation;
    let t_end = a.t_end.unwrap_or(32.0 / cfg.drive.g0);
    cfg.integrator.t_end = Some(t_end);
    cfg.integrator.n_points = cfg.integrator.n_points.max(2001);
    cfg.validate()?;
    let hash = config_hash(
        serde_json::json!({
            "command": "steer", "config": cfg, "theta0": a.theta0, "phi0": a.phi0, "cavity": a.cavity,
        })
        .to_string()
        .as_bytes(),
    );

    let predicted = attractor_direction(&effective_coupling_vector(
        cfg.drive.g0,
        a.eta,
        a.orientation,
    )?);
    let builder = HamiltonianBuilder::new(cfg.model, cfg.drive_spec(), Form::FullRabi)?;
    let s0 = prepare_state(a.theta0, a.phi0, a.cavity, cfg.model.trunc())?;
    let rec = evolve(&s0, &builder, &cfg.integrator_config())?;

    let start = rec.times.partition_point(|&t| t < 0.9 * t_end);
    let tail = &rec.bloch[start..];
    let k = tail.len() as f64;
    let mean = tail.iter().fold(BlochVector::new(0.0, 0.0, 0.0), |m, b| {
        BlochVector::new(m.x + b.x / k, m.y + b.y / k, m.z + b.z / k)
    });
    let len = mean.norm();
    if !(len > 1e-9) {
        bail!(
            "late-time mean Bloch vector vanishes (|<sigma>| = {len:.3e}); no direction to report"
        );
    }
    let measured = mean.normalized();
    let report = SteerReport {
        schema_version: JSON_SCHEMA_VERSION,
        config_hash: hash,
        eta: a.eta,
        orientation: a.orientation,
        predicted_attractor: predicted,
        measured_attractor: measured,
        angular_error: predicted.angle_to(&measured),
        mean_bloch_length: len,
        trusted: rec.trusted,
        t_end,
    };
    let dir = out_dir(&cfg.output_dir)?;
    write_json(&dir.join("steer.json"), &report)?;
    print_line(&report)?;
    if !rec.trusted {
        eprintln!(
            "warning: leakage into the top Fock levels reached {:.3e}; raise n_max",
            rec.max_leakage()
        );
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyReport {
    schema_version: u32,
    n_max: usize,
    drop_top: usize,
    threshold: f64,
    projected: CommutatorResiduals,
    unprojected: CommutatorResiduals,
    pass: bool,
}

pub const ALGEBRA_THRESHOLD: f64 = 1e-10;

fn cmd_verify_algebra(a: VerifyArgs) -> anyhow::Result<i32> {
    if a.n_max < 4 {
        bail!("--n-max must be >= 4, got {}", a.n_max);
    }
    if a.drop_top >= a.n_max {
        bail!("--drop-top must be smaller than --n-max");
    }
    let trunc = FockTruncation::new(a.n_max)?;
    let projected = commutator_residuals(trunc, a.drop_top)?;
    let unprojected = commutator_residuals(trunc, 0)?;
    let pass = projected.max() < ALGEBRA_THRESHOLD;
    print_line(&VerifyReport {
        schema_version: JSON_SCHEMA_VERSION,
        n_max: a.n_max,
        drop_top: a.drop_top,
        threshold: ALGEBRA_THRESHOLD,
        projected,
        unprojected,
        pass,
    })?;
    Ok(if pass { EXIT_OK } else { EXIT_ERROR })
}
