//! `nusest` command-line front end.
//!
//! Subcommands:
//!
//! * `fig23`: Monte Carlo RMS-versus-carrier curves for ML, PE and PEInf.
//! * `fig6`: deterministic RMS reduction of PE over ML for single-impulse channels.
//! * `bound-check`: Monte Carlo check of the estimator's squared-error bound.
//!
//! Exit codes: 0 success, 1 property failure, 2 usage error, 3 I/O error. The
//! `NUSEST_THREADS` environment variable caps the number of worker threads.

pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::channel::write_channels;
use crate::error::Error;
use crate::experiments::{
    default_tau_grid, run_bound_check, run_delay_frequency_surface, run_rms_curves, trial_channels,
    BoundCheckConfig, Estimator, ExperimentConfig, SignalMode, SweepPoint,
};
use crate::tdl::TapWindow;
use output::{OutputFormat, OutputSet, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const THREADS_ENV: &str = "NUSEST_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "nusest",
    version,
    about = "Band-limited channel spectrum estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// RMS error per carrier for the ML, PE and PEInf estimators.
    Fig23(Fig23Args),
    /// RMS reduction of PE relative to ML over delays and frequencies.
    Fig6(Fig6Args),
    /// Check the squared-error bound on random configurations.
    BoundCheck(BoundCheckArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Delay spread as a fraction of the inverse average pilot spacing, in ]0, 1].
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// SNR in dB.
    #[arg(long = "gamma-db", allow_negative_numbers = true)]
    gamma_db: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// ML tap window placement: centered or causal.
    #[arg(long = "ml-window", value_parser = parse_window)]
    ml_window: Option<TapWindow>,
    /// Fix the ML tap count instead of sweeping 1..=M.
    #[arg(long = "ml-taps")]
    ml_taps: Option<usize>,
    /// Amplitude bound A used by PE (mu = sigma^2 / A^2).
    #[arg(long = "amplitude-bound")]
    amplitude_bound: Option<f64>,
    /// Evaluate only data (non-pilot) carriers.
    #[arg(long = "data-carriers-only")]
    data_carriers_only: bool,
    /// key = value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Fig23Args {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of channel realisations.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of ML, PE, PEInf.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<Estimator>>,
    /// Poisson parameter of the extra tap count.
    #[arg(long)]
    lambda: Option<f64>,
    /// Also write every trial's channel to channels.txt.
    #[arg(long = "dump-channels")]
    dump_channels: bool,
}

#[derive(Debug, Args)]
struct Fig6Args {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of interior delay points in ]0, T_h[.
    #[arg(long = "tau-points")]
    tau_points: Option<usize>,
}

#[derive(Debug, Args)]
struct BoundCheckArgs {
    #[arg(long)]
    configs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Noise draws per test point.
    #[arg(long)]
    draws: Option<usize>,
    /// fixed: one bounded signal per configuration; ensemble: redraw per sample.
    #[arg(long = "signal-mode", value_parser = parse_signal_mode)]
    signal_mode: Option<SignalMode>,
    /// Harness self-test: halves the bound, so the check must fail.
    #[arg(long = "self-test")]
    self_test: bool,
    /// Write the full report as JSON to this file.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_window(s: &str) -> Result<TapWindow, String> {
    match s {
        "centered" => Ok(TapWindow::Centered),
        "causal" => Ok(TapWindow::Causal),
        _ => Err(format!("expected `centered` or `causal`, got `{s}`")),
    }
}

fn parse_signal_mode(s: &str) -> Result<SignalMode, String> {
    match s {
        "fixed" => Ok(SignalMode::Fixed),
        "ensemble" => Ok(SignalMode::Ensemble),
        _ => Err(format!("expected `fixed` or `ensemble`, got `{s}`")),
    }
}

/// Entries accepted in a `--config` file. Keys use `snake_case` or `kebab-case`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    alpha: Option<f64>,
    #[serde(alias = "gamma-db")]
    gamma_db: Option<f64>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    #[serde(alias = "ml-window")]
    ml_window: Option<TapWindow>,
    #[serde(alias = "ml-taps")]
    ml_taps: Option<usize>,
    #[serde(alias = "amplitude-bound")]
    amplitude_bound: Option<f64>,
    #[serde(alias = "data-carriers-only")]
    data_carriers_only: Option<bool>,
    trials: Option<usize>,
    seed: Option<u64>,
    estimators: Option<Vec<Estimator>>,
    lambda: Option<f64>,
    #[serde(alias = "dump-channels")]
    dump_channels: Option<bool>,
    #[serde(alias = "tau-points")]
    tau_points: Option<usize>,
    configs: Option<usize>,
    draws: Option<usize>,
    #[serde(alias = "signal-mode")]
    signal_mode: Option<SignalMode>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    PropertyFailure(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn io_err(context: &str, path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{context} {}: {e}", path.display()))
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| io_err("cannot read", path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Runs the CLI with explicit arguments (the first one is the program name).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match worker_pool() {
        Ok(pool) => pool.install(|| dispatch(cli.command)),
        Err(e) => Err(e),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            EXIT_IO
        }
        Err(CliError::PropertyFailure(msg)) => {
            eprintln!("{msg}");
            EXIT_PROPERTY_FAILURE
        }
    }
}

fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fig23(args) => cmd_fig23(args),
        Command::Fig6(args) => cmd_fig6(args),
        Command::BoundCheck(args) => cmd_bound_check(args),
    }
}

struct Resolved {
    config: ExperimentConfig,
    out: PathBuf,
    format: OutputFormat,
}

fn resolve_common(common: &CommonArgs, file: &FileConfig) -> Resolved {
    let defaults = ExperimentConfig::default();
    let config = ExperimentConfig {
        alpha: common.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        gamma_db: common
            .gamma_db
            .or(file.gamma_db)
            .unwrap_or(defaults.gamma_db),
        ml_window: common
            .ml_window
            .or(file.ml_window)
            .unwrap_or(defaults.ml_window),
        ml_taps: common.ml_taps.or(file.ml_taps),
        amplitude_bound: common
            .amplitude_bound
            .or(file.amplitude_bound)
            .unwrap_or(defaults.amplitude_bound),
        data_carriers_only: common.data_carriers_only || file.data_carriers_only.unwrap_or(false),
        ..defaults
    };
    Resolved {
        config,
        out: common
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        format: common.format.or(file.format).unwrap_or(OutputFormat::Csv),
    }
}

/// Contents of `summary.json` written by `fig23`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig23Summary {
    pub alpha: f64,
    pub gamma_db: f64,
    pub noise_variance: f64,
    pub delay_spread: f64,
    pub trials: usize,
    pub seed: u64,
    pub evaluation_carriers: usize,
    pub mean_rms_db: BTreeMap<Estimator, f64>,
    pub improvement_pe_vs_ml_db: Option<f64>,
    pub improvement_peinf_vs_ml_db: Option<f64>,
    pub improvement_pe_vs_peinf_db: Option<f64>,
    pub selected_ml_taps: Option<usize>,
    pub ml_first_tap: Option<i64>,
    pub ml_window: TapWindow,
    pub ml_sweep: Vec<SweepPoint>,
    pub peinf_ridge: Option<f64>,
}

fn cmd_fig23(args: Fig23Args) -> Result<(), CliError> {
    let start = Instant::now();
    let file = load_file_config(args.common.config.as_deref())?;
    let mut resolved = resolve_common(&args.common, &file);
    let cfg = &mut resolved.config;
    cfg.trials = args.trials.or(file.trials).unwrap_or(cfg.trials);
    cfg.seed = args.seed.or(file.seed).unwrap_or(cfg.seed);
    cfg.lambda = args.lambda.or(file.lambda).unwrap_or(cfg.lambda);
    if let Some(e) = args.estimators.clone().or_else(|| file.estimators.clone()) {
        cfg.estimators = e;
    }
    let dump_channels = args.dump_channels || file.dump_channels.unwrap_or(false);
    cfg.validate()?;

    let curve = run_rms_curves(cfg)?;

    let mut files = OutputSet::default();
    match resolved.format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            output::write_rms_curve_csv(&mut buf, &curve)
                .map_err(|e| CliError::Io(e.to_string()))?;
            files.add("rms_curve.csv", buf);
        }
        OutputFormat::Json => files
            .add_json("rms_curve.json", &output::rms_curve_rows(&curve))
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    let mean_rms_db = curve
        .rms
        .keys()
        .filter_map(|&e| curve.mean_db(e).map(|v| (e, v)))
        .collect();
    let summary = Fig23Summary {
        alpha: cfg.alpha,
        gamma_db: cfg.gamma_db,
        noise_variance: cfg.noise_variance(),
        delay_spread: cfg.delay_spread()?,
        trials: cfg.trials,
        seed: cfg.seed,
        evaluation_carriers: curve.carrier_indices.len(),
        mean_rms_db,
        improvement_pe_vs_ml_db: curve.mean_improvement_db(Estimator::Pe, Estimator::Ml),
        improvement_peinf_vs_ml_db: curve.mean_improvement_db(Estimator::PeInf, Estimator::Ml),
        improvement_pe_vs_peinf_db: curve.mean_improvement_db(Estimator::Pe, Estimator::PeInf),
        selected_ml_taps: curve.ml_model.map(|m| m.n_taps),
        ml_first_tap: curve.ml_model.map(|m| m.first_tap),
        ml_window: cfg.ml_window,
        ml_sweep: curve.ml_sweep.clone(),
        peinf_ridge: curve.peinf_ridge,
    };
    files
        .add_json("summary.json", &summary)
        .map_err(|e| CliError::Io(e.to_string()))?;
    if dump_channels {
        let mut buf = Vec::new();
        write_channels(&mut buf, cfg.seed, &trial_channels(cfg)?)
            .map_err(|e| CliError::Io(e.to_string()))?;
        files.add("channels.txt", buf);
    }

    let results = serde_json::json!({
        "improvement_pe_vs_ml_db": summary.improvement_pe_vs_ml_db,
        "mean_rms_db": summary.mean_rms_db,
    });
    finish(
        "fig23",
        cfg,
        cfg.seed,
        summary.selected_ml_taps,
        summary.ml_first_tap,
        results,
        files,
        &resolved.out,
        start,
    )?;
    println!(
        "alpha={} trials={} seed={} selected ML taps={:?} (first tap {:?})",
        cfg.alpha, cfg.trials, cfg.seed, summary.selected_ml_taps, summary.ml_first_tap
    );
    for (e, v) in &summary.mean_rms_db {
        println!("  mean RMS {e:<5} {v:8.3} dB");
    }
    if let Some(v) = summary.improvement_pe_vs_ml_db {
        println!("  PE improvement over ML: {v:.3} dB");
    }
    println!("wrote {}", resolved.out.display());
    Ok(())
}

fn cmd_fig6(args: Fig6Args) -> Result<(), CliError> {
    let start = Instant::now();
    let file = load_file_config(args.common.config.as_deref())?;
    let resolved = resolve_common(&args.common, &file);
    let cfg = &resolved.config;
    let tau_points = args.tau_points.or(file.tau_points).unwrap_or(101);
    if tau_points == 0 {
        return Err(CliError::Usage("--tau-points must be at least 1".into()));
    }
    cfg.validate()?;

    let taus = default_tau_grid(cfg.delay_spread()?, tau_points);
    let freqs: Vec<f64> = cfg
        .evaluation_carriers()
        .iter()
        .map(|&i| i as f64 * cfg.carrier_spacing)
        .collect();
    let surface = run_delay_frequency_surface(cfg, &taus, &freqs)?;

    let mut files = OutputSet::default();
    match resolved.format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            output::write_surface_csv(&mut buf, &surface)
                .map_err(|e| CliError::Io(e.to_string()))?;
            files.add("reduction_surface.csv", buf);
        }
        OutputFormat::Json => files
            .add_json("reduction_surface.json", &output::surface_rows(&surface))
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    let interior = surface.interior_median(0.8);
    let results = serde_json::json!({
        "sign_convention": crate::experiments::SIGN_CONVENTION,
        "interior_median_reduction_db": interior,
        "median_reduction_db": surface.median(),
        "tau_points": tau_points,
        "frequency_points": freqs.len(),
    });
    finish(
        "fig6",
        cfg,
        cfg.seed,
        Some(surface.ml_model.n_taps),
        Some(surface.ml_model.first_tap),
        results,
        files,
        &resolved.out,
        start,
    )?;
    println!(
        "alpha={} ML taps={} (first tap {}); interior median reduction {:.3} dB",
        cfg.alpha, surface.ml_model.n_taps, surface.ml_model.first_tap, interior
    );
    println!("wrote {}", resolved.out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish(
    command: &str,
    cfg: &ExperimentConfig,
    seed: u64,
    selected_ml_taps: Option<usize>,
    ml_first_tap: Option<i64>,
    results: serde_json::Value,
    mut files: OutputSet,
    out: &Path,
    start: Instant,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        tool: "nusest".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config: serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?,
        seed,
        rng_scheme: crate::rng::SCHEME.into(),
        selected_ml_taps,
        ml_first_tap,
        started_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        results,
        outputs: files.digests(),
    };
    files
        .add_json("manifest.json", &manifest)
        .map_err(|e| CliError::Io(e.to_string()))?;
    files
        .write_all(out)
        .map_err(|e| io_err("cannot write to", out, e))?;
    Ok(())
}

fn cmd_bound_check(args: BoundCheckArgs) -> Result<(), CliError> {
    let file = load_file_config(args.config.as_deref())?;
    let defaults = BoundCheckConfig::default();
    let cfg = BoundCheckConfig {
        configs: args.configs.or(file.configs).unwrap_or(defaults.configs),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        draws: args.draws.or(file.draws).unwrap_or(defaults.draws),
        signal_mode: args
            .signal_mode
            .or(file.signal_mode)
            .unwrap_or(defaults.signal_mode),
        bound_scale: if args.self_test { 0.5 } else { 1.0 },
        ..defaults
    };
    let reports = run_bound_check(&cfg)?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut failed = 0;
    for r in &reports {
        let status = if r.pass() { "PASS" } else { "FAIL" };
        if !r.pass() {
            failed += 1;
        }
        let _ = writeln!(
            out,
            "config {:>3} {status} M={:<2} A={:.3} sigma2={:.3e} worst margin={:+.4e}",
            r.index,
            r.abscissas.len(),
            r.amplitude_bound,
            r.noise_variance,
            r.worst_margin()
        );
    }
    let _ = writeln!(
        out,
        "bound-check ({:?} signals, {} draws, {}x std error{}): {}/{} configurations pass",
        cfg.signal_mode,
        cfg.draws,
        cfg.sigma_k,
        if args.self_test { ", bound halved" } else { "" },
        reports.len() - failed,
        reports.len()
    );
    drop(out);

    if let Some(path) = &args.report {
        let mut bytes =
            serde_json::to_vec_pretty(&reports).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).map_err(|e| io_err("cannot write", path, e))?;
    }
    if failed > 0 {
        return Err(CliError::PropertyFailure(format!(
            "{failed} configuration(s) exceed the error bound"
        )));
    }
    Ok(())
}
