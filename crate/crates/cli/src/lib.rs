//! Command-line front end: simulations, capture checks, coupling estimates,
//! expansion coefficients and the resonance cascade.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, files,
//! parameters), 3 for numerical failures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use spinorbit::analysis::{
    capture_verdict, cascade, detect_lock, write_cascade_csv, CascadeOptions, EccentricityLaw, LockVerdict,
    Shell,
};
use spinorbit::bodies::{coupling_ratio, timescales, CouplingSet};
use spinorbit::dynamics::{integrate, IntegratorOptions, Sampling, TimeUnit};
use spinorbit::{BodyParameters, ExpansionTable, ModelCoefficients, Trajectory};

pub use config::{CoefficientSource, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] spinorbit::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

fn io_error(path: &Path, err: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {err}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "spinorbit", version, about = "Two-layer spin-orbit resonance toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the averaged crust/core equations.
    Simulate(SimulateArgs),
    /// Equilibrium conditions and capture certainty at one resonance (JSON).
    Check(CheckArgs),
    /// Couplings, their ratio and the three timescales (JSON, SI units).
    Estimate(EstimateArgs),
    /// Eccentricity-expansion coefficients a_n, c_n (CSV).
    Coefficients(CoefficientsArgs),
    /// Event-driven descent through the resonances.
    Cascade(CascadeArgs),
    /// Run several scenario files concurrently.
    Sweep(SweepArgs),
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// fig3, fig4 or eq35.
    #[arg(long)]
    pub preset: Option<String>,
    /// Scenario file (TOML, or a previous run's JSON summary).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub body: Option<String>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long, value_enum)]
    pub coefficients: Option<CoefficientArg>,
    #[arg(long, value_enum)]
    pub time_unit: Option<TimeUnitArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v_gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v_eta: Option<f64>,
    /// Duration, in the scenario's time unit.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub sample_interval: Option<f64>,
    #[arg(long)]
    pub lock_window: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Output stem: writes <stem>.csv and <stem>.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write two-column panels <stem>.crust.csv (t,v_gamma) and <stem>.core.csv (t,v_eta).
    #[arg(long)]
    pub panels: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CoefficientArg {
    Derived,
    Eq35,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TimeUnitArg {
    Years,
    Seconds,
}

#[derive(Debug, clap::Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub body: String,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Core libration rate (rad/s) for the crust condition.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub v_eta: f64,
}

#[derive(Debug, clap::Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub body: String,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
}

#[derive(Debug, clap::Args)]
pub struct CoefficientsArgs {
    #[arg(long)]
    pub e: f64,
    #[arg(long, default_value_t = spinorbit::kepler::DEFAULT_MAX_ORDER)]
    pub n_max: usize,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LawArg {
    Decay,
    Frozen,
}

#[derive(Debug, clap::Args)]
pub struct CascadeArgs {
    #[arg(long)]
    pub body: String,
    #[arg(long, default_value_t = 1)]
    pub k_start: u32,
    /// Initial eccentricity; defaults to the body's.
    #[arg(long)]
    pub e0: Option<f64>,
    /// Initial spin in units of the mean motion; defaults to resonance k_start.
    #[arg(long)]
    pub spin0: Option<f64>,
    #[arg(long, value_enum, default_value = "decay")]
    pub law: LawArg,
    /// Time horizon in seconds.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Output stem: writes <stem>.csv and <stem>.json instead of CSV on stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    /// Scenario files; each must name a distinct output path.
    #[arg(required = true)]
    pub configs: Vec<PathBuf>,
}

/// Parses `args` and runs the command, writing results to `stdout`.
pub fn run_with<I, S>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return Err(CliError::Config(e.to_string())),
        Err(e) => {
            write!(stdout, "{e}").map_err(|e| CliError::Config(e.to_string()))?;
            return Ok(());
        }
    };
    match cli.command {
        Command::Simulate(args) => {
            let config = resolve_simulation(&args)?;
            let summary = simulate(&config)?;
            if config.output.path.is_none() {
                emit_json(stdout, &summary)?;
            }
            Ok(())
        }
        Command::Check(args) => emit_json(stdout, &check(&args)?),
        Command::Estimate(args) => emit_json(stdout, &estimate(&args)?),
        Command::Coefficients(args) => coefficients(&args, stdout),
        Command::Cascade(args) => run_cascade(&args, stdout),
        Command::Sweep(args) => emit_json(stdout, &sweep(&args)?),
    }
}

/// Entry point of the binary.
pub fn main_exit() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    match run_with(std::env::args_os(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn emit_json(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| CliError::Config(e.to_string()))
}

/// Preset, then scenario file, then individual flags.
pub fn resolve_simulation(args: &SimulateArgs) -> Result<ScenarioConfig, CliError> {
    let mut config = match (&args.preset, &args.config) {
        (Some(_), Some(_)) => return Err(CliError::Config("--preset and --config are exclusive".into())),
        (Some(name), None) => ScenarioConfig::preset(name)?,
        (None, Some(path)) => ScenarioConfig::from_path(path)?,
        (None, None) => {
            return Err(CliError::Config("simulate needs --preset or --config".into()));
        }
    };
    if let Some(body) = &args.body {
        config.body = Some(body.clone());
    }
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(c) = args.coefficients {
        config.coefficients = match c {
            CoefficientArg::Derived => CoefficientSource::Derived,
            CoefficientArg::Eq35 => CoefficientSource::Eq35,
        };
    }
    if let Some(u) = args.time_unit {
        config.time_unit = match u {
            TimeUnitArg::Years => TimeUnit::Years,
            TimeUnitArg::Seconds => TimeUnit::Seconds,
        };
    }
    let init = &mut config.initial;
    for (slot, value) in [
        (&mut init.gamma, args.gamma),
        (&mut init.v_gamma, args.v_gamma),
        (&mut init.eta, args.eta),
        (&mut init.v_eta, args.v_eta),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(t) = args.t_end {
        config.t_end = t;
    }
    if let Some(t) = args.tol {
        config.tol = t;
    }
    if let Some(dt) = args.sample_interval {
        config.sample_interval = dt;
    }
    if let Some(w) = args.lock_window {
        config.lock_window = Some(w);
    }
    if let Some(s) = args.stride {
        config.output.stride = s;
    }
    if let Some(out) = &args.out {
        config.output.path = Some(out.clone());
    }
    if args.panels {
        config.output.panels = true;
    }
    config.validate()?;
    Ok(config)
}

/// Integrates a scenario. Returns the trajectory and the coefficients used.
pub fn integrate_scenario(config: &ScenarioConfig) -> Result<(Trajectory, ModelCoefficients), CliError> {
    let (coeffs, _) = config.model()?;
    let options = IntegratorOptions::with_tolerance(config.tol).sampling(Sampling::Interval(config.sample_interval));
    let initial = config.initial.state();
    let trajectory = integrate(&coeffs, initial, initial.t + config.t_end, &options, config.time_unit)?;
    Ok((trajectory, coeffs))
}

fn lock_json(trajectory: &Trajectory, window: f64) -> Value {
    let verdict = |shell| match detect_lock(trajectory, shell, window) {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "verdict": "undetermined", "reason": e.to_string() }),
    };
    json!({ "window": window, "crust": verdict(Shell::Crust), "core": verdict(Shell::Core) })
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_panel(path: &Path, trajectory: &Trajectory, stride: usize, column: &str) -> Result<(), CliError> {
    let mut text = format!("t,{column}\n");
    let samples = trajectory.samples();
    for (i, s) in samples.iter().enumerate() {
        if i % stride == 0 || i == samples.len() - 1 {
            let v = if column == "v_gamma" { s.v_gamma } else { s.v_eta };
            text.push_str(&format!("{},{}\n", s.t, v));
        }
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Runs one scenario, writing files when an output path is set, and returns
/// the JSON summary.
pub fn simulate(config: &ScenarioConfig) -> Result<Value, CliError> {
    let (trajectory, coeffs) = integrate_scenario(config)?;
    let mut outputs = serde_json::Map::new();
    let mut summary = json!({
        "command": "simulate",
        "config": config,
        "coefficients": coeffs,
        "integrator": trajectory.summary_json(),
        "lock": lock_json(&trajectory, config.lock_window()),
        "final_state": trajectory.last(),
    });
    if let Some(stem) = &config.output.path {
        if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
        let csv_path = with_suffix(stem, ".csv");
        trajectory
            .save_csv(&csv_path, config.output.stride)
            .map_err(|e| match e {
                spinorbit::Error::Io(io) => io_error(&csv_path, io),
                other => other.into(),
            })?;
        outputs.insert("trajectory".into(), json!(csv_path));
        if config.output.panels {
            let crust = with_suffix(stem, ".crust.csv");
            let core = with_suffix(stem, ".core.csv");
            write_panel(&crust, &trajectory, config.output.stride, "v_gamma")?;
            write_panel(&core, &trajectory, config.output.stride, "v_eta")?;
            outputs.insert("crust_panel".into(), json!(crust));
            outputs.insert("core_panel".into(), json!(core));
        }
        let json_path = with_suffix(stem, ".json");
        summary["outputs"] = Value::Object(outputs);
        let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&json_path, text + "\n").map_err(|e| io_error(&json_path, e))?;
    }
    Ok(summary)
}

fn load_body(reference: &str) -> Result<BodyParameters, CliError> {
    Ok(BodyParameters::load(reference)?)
}

pub fn check(args: &CheckArgs) -> Result<Value, CliError> {
    let params = load_body(&args.body)?;
    let verdict = capture_verdict(&params, args.k, args.v_eta)?;
    Ok(json!({
        "command": "check",
        "input": { "body": args.body, "k": args.k, "v_eta": args.v_eta },
        "body_parameters": params,
        "units": "SI (rates in rad/s)",
        "verdict": verdict,
    }))
}

pub fn estimate(args: &EstimateArgs) -> Result<Value, CliError> {
    let params = load_body(&args.body)?;
    let coupling = CouplingSet::for_body(&params, args.k)?;
    let scales = timescales(&coupling);
    let derived = ModelCoefficients::from_body(&params, args.k, TimeUnit::Years)?;
    let printed = ModelCoefficients::eq35();
    let ratio = |a: f64, b: f64| if b != 0.0 { json!(a / b) } else { Value::Null };
    Ok(json!({
        "command": "estimate",
        "input": { "body": args.body, "k": args.k },
        "body_parameters": params,
        "units": "SI",
        "lambda": coupling.lambda,
        "lambda_prime": coupling.lambda_prime,
        "lambda_ratio": coupling_ratio(&params, args.k)?,
        "C": coupling.c,
        "C_prime": coupling.c_prime,
        "tau_gamma": scales.tau_gamma,
        "tau_eta": scales.tau_eta,
        "tau_eta_prime": scales.tau_eta_prime,
        "timescales_ordered": scales.is_ordered(),
        "diagnostic": {
            "note": "coefficients derived from the body (per year) against the printed eq35 set",
            "derived": derived,
            "eq35": printed,
            "derived_over_eq35": {
                "A_crust": ratio(derived.a_crust, printed.a_crust),
                "A_core": ratio(derived.a_core, printed.a_core),
                "inv_tau_gamma": ratio(derived.inv_tau_gamma, printed.inv_tau_gamma),
                "inv_tau_eta": ratio(derived.inv_tau_eta, printed.inv_tau_eta),
                "inv_tau_eta_prime": ratio(derived.inv_tau_eta_prime, printed.inv_tau_eta_prime),
                "drift": ratio(derived.drift, printed.drift),
            },
        },
    }))
}

pub fn coefficients(args: &CoefficientsArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let table = ExpansionTable::compute(args.e, args.n_max)?;
    let mut text = String::from("n,a_n,c_n\n");
    for n in 0..=args.n_max {
        text.push_str(&format!("{n},{},{}\n", table.a_coeffs[n], table.c_coeffs[n]));
    }
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Config(e.to_string())),
    }
}

pub fn run_cascade(args: &CascadeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let params = load_body(&args.body)?;
    let e0 = args.e0.unwrap_or(params.e);
    let spin0 = args.spin0.unwrap_or(args.k_start as f64 / 2.0 + 1.0);
    let law = match args.law {
        LawArg::Decay => EccentricityLaw::ExponentialDecay,
        LawArg::Frozen => EccentricityLaw::Frozen,
    };
    let options = CascadeOptions { law, t_max: args.t_max };
    let episodes = cascade(&params, args.k_start, e0, spin0, &options)?;
    let mut csv = Vec::new();
    write_cascade_csv(&episodes, &mut csv)?;
    match &args.out {
        None => stdout.write_all(&csv).map_err(|e| CliError::Config(e.to_string())),
        Some(stem) => {
            let csv_path = with_suffix(stem, ".csv");
            std::fs::write(&csv_path, &csv).map_err(|e| io_error(&csv_path, e))?;
            let summary = json!({
                "command": "cascade",
                "input": {
                    "body": args.body,
                    "k_start": args.k_start,
                    "e0": e0,
                    "spin0": spin0,
                    "law": law,
                    "t_max": args.t_max,
                },
                "body_parameters": params,
                "modelling_note": "eccentricity decay law exp(-t/tau'_eta) while locked is a modelling choice",
                "units": "SI (times in s; a null t_exit means no horizon)",
                "episodes": episodes,
            });
            let json_path = with_suffix(stem, ".json");
            let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?;
            std::fs::write(&json_path, text + "\n").map_err(|e| io_error(&json_path, e))
        }
    }
}

pub fn sweep(args: &SweepArgs) -> Result<Value, CliError> {
    let configs = args
        .configs
        .iter()
        .map(|p| ScenarioConfig::from_path(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = std::collections::HashSet::new();
    for (path, config) in args.configs.iter().zip(&configs) {
        match &config.output.path {
            None => return Err(CliError::Config(format!("{}: sweep needs output.path", path.display()))),
            Some(out) if !seen.insert(out.clone()) => {
                return Err(CliError::Config(format!("output path {} used twice", out.display())));
            }
            Some(_) => {}
        }
    }
    let results: Vec<Result<Value, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || simulate(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Config("worker panicked".into()))))
            .collect()
    });
    let mut runs = Vec::new();
    for (path, result) in args.configs.iter().zip(results) {
        let summary = result?;
        runs.push(json!({ "config_file": path, "outputs": summary["outputs"] }));
    }
    Ok(json!({ "command": "sweep", "runs": runs }))
}

/// Crust verdict helper shared with the tests: the librating rate, if any.
pub fn librating_rate(verdict: &LockVerdict<f64>) -> Option<f64> {
    match verdict {
        LockVerdict::LibratingAbout { rate } => Some(*rate),
        _ => None,
    }
}
