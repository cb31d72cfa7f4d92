//! The `bipsmc` command line.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use bipsmc::monitor::{parse_formula, MtlFormula};
use bipsmc::smc::{
    check_hypothesis_parameters, estimate, hypothesis_test, sample_size, Decision, EstimationRequest,
    EstimationResult, Execution, HypothesisRequest, SmcError, DEFAULT_EPSILON,
};
use bipsmc::stochastics::{load_dataset_with, rng_stream, validate_dataset, ParseMode, ReliabilityPolicy, TimeUnit};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use config::{DatasetRef, ExperimentConfig, Instantiated, Loader};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("runtime: {0}")]
    Runtime(String),
    #[error("property: {0}")]
    Property(String),
    #[error("hypothesis test undecided after the sample limit")]
    Undecided,
    #[error("dataset is not reliable")]
    Unreliable,
    #[error("output: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Dataset(_) => 3,
            CliError::Runtime(_) | CliError::Io(_) => 4,
            CliError::Property(_) => 5,
            CliError::Undecided => 6,
            CliError::Unreliable => 7,
        }
    }
}

impl From<SmcError> for CliError {
    fn from(e: SmcError) -> Self {
        match e {
            SmcError::BadParameter(m) => CliError::Config(m),
            SmcError::Monitor(m) => CliError::Property(m.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bipsmc", version, about = "Statistical model checking of stochastic timed component models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trace and write it as CSV.
    Simulate(RunArgs),
    /// Estimate the probability that the property holds.
    Estimate(RunArgs),
    /// Sequential test of P(property) >= theta.
    Test {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Type-II error; defaults to alpha.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        max_samples: Option<u64>,
    },
    /// Estimate at every point of the configured sweep; writes CSV.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Evaluate sweep points concurrently.
        #[arg(long)]
        parallel_sweep: bool,
    },
    /// Validate a dataset file and print the report.
    CheckData {
        path: PathBuf,
        #[arg(long, default_value = "seconds")]
        unit: TimeUnit,
        #[arg(long, default_value_t = 7.0)]
        max_gap_days: f64,
        #[arg(long, default_value_t = 100)]
        min_rows: usize,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// dns, mempool, consensus, constant or coin.
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameter override, e.g. `--set t_prime=600`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub property: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Dataset for a model role, e.g. `--data mining_time=blocks.csv`.
    #[arg(long = "data", value_name = "ROLE=PATH")]
    pub data: Vec<String>,
    /// Unit of the values in `--data` files.
    #[arg(long, default_value = "seconds")]
    pub unit: TimeUnit,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub allow_unreliable: bool,
    /// Run traces one after another instead of in parallel.
    #[arg(long)]
    pub sequential: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match (&self.config, &self.model) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::for_model(name),
            (None, None) => return Err(CliError::Config("either --config or --model is required".into())),
        };
        if let Some(name) = &self.model {
            cfg.set_model_name(name);
        }
        for kv in &self.set {
            let (k, v) = split_pair(kv, "--set")?;
            let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.to_string()));
            cfg.model.insert(k.to_string(), value);
        }
        if let Some(p) = &self.property {
            cfg.property = Some(p.clone());
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = Some(h);
        }
        for kv in &self.data {
            let (role, path) = split_pair(kv, "--data")?;
            cfg.datasets.retain(|d| d.role != role);
            cfg.datasets.push(DatasetRef {
                role: role.to_string(),
                path: PathBuf::from(path),
                unit: self.unit,
            });
        }
        Ok(cfg)
    }

    fn loader(&self) -> Loader {
        Loader {
            allow_unreliable: self.allow_unreliable,
            policy: ReliabilityPolicy::default(),
        }
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn split_pair<'a>(kv: &'a str, flag: &str) -> Result<(&'a str, &'a str), CliError> {
    kv.split_once('=')
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| CliError::Config(format!("{flag} expects KEY=VALUE, got `{kv}`")))
}

fn formula(inst: &Instantiated) -> Result<MtlFormula, CliError> {
    parse_formula(&inst.property_text).map_err(|e| CliError::Property(e.to_string()))
}

fn write_json<T: Serialize>(value: &T, out: &mut dyn Write, file: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("results serialize") + "\n";
    out.write_all(text.as_bytes())?;
    if let Some(path) = file {
        std::fs::write(path, &text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    seed: u64,
    horizon: f64,
    points: usize,
    last_event_time: f64,
    #[serde(rename = "final")]
    final_values: serde_json::Map<String, serde_json::Value>,
}

fn cmd_simulate(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let path = args
        .out
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate needs --out for the trace CSV".into()))?;
    let cfg = args.resolve()?;
    let inst = args.loader().instantiate(&cfg, None)?;
    let trace = inst
        .model
        .simulate(inst.horizon, &mut rng_stream(cfg.seed, 0))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let file = File::create(path)?;
    trace
        .write_csv(BufWriter::new(file))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let last = trace.last();
    let final_values = trace
        .variables()
        .iter()
        .zip(&last.values)
        .map(|(k, v)| (k.clone(), serde_json::to_value(v).expect("values serialize")))
        .collect();
    write_json(
        &SimulationSummary {
            seed: cfg.seed,
            horizon: trace.horizon(),
            points: trace.points().len(),
            last_event_time: last.time,
            final_values,
        },
        out,
        None,
    )
}

fn run_estimate(inst: &Instantiated, cfg: &ExperimentConfig, seed: u64, execution: Execution) -> Result<EstimationResult, CliError> {
    let f = formula(inst)?;
    Ok(estimate(&EstimationRequest {
        model: &inst.model,
        formula: &f,
        delta: cfg.delta,
        alpha: cfg.alpha,
        master_seed: seed,
        horizon: inst.horizon,
        execution,
    })?)
}

fn cmd_estimate(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    sample_size(cfg.delta, cfg.alpha)?;
    let inst = args.loader().instantiate(&cfg, None)?;
    let r = run_estimate(&inst, &cfg, cfg.seed, args.execution())?;
    write_json(&r, out, args.out.as_deref())
}

fn cmd_test(
    args: &RunArgs,
    theta: f64,
    epsilon: f64,
    beta: Option<f64>,
    max_samples: Option<u64>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let beta = beta.unwrap_or(cfg.alpha);
    check_hypothesis_parameters(theta, epsilon, cfg.alpha, beta)?;
    let inst = args.loader().instantiate(&cfg, None)?;
    let f = formula(&inst)?;
    let mut req = HypothesisRequest::new(&inst.model, &f, inst.horizon, cfg.seed, theta, cfg.alpha)?;
    req.epsilon = epsilon;
    req.beta = beta;
    req.max_samples = match max_samples {
        Some(m) => m,
        None => 10 * sample_size(epsilon, cfg.alpha)?,
    };
    req.execution = args.execution();
    let r = hypothesis_test(&req)?;
    write_json(&r, out, args.out.as_deref())?;
    if r.decision == Decision::Undecided {
        return Err(CliError::Undecided);
    }
    Ok(())
}

/// One sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub p_hat: f64,
    pub n_traces: u64,
    pub successes: u64,
}

pub fn run_sweep(cfg: &ExperimentConfig, loader: &Loader, execution: Execution, parallel_points: bool) -> Result<Vec<SweepRow>, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no sweep section".into()))?;
    sample_size(cfg.delta, cfg.alpha)?;
    let points = sweep.points()?;
    let one = |(i, x): (usize, f64)| -> Result<SweepRow, CliError> {
        let inst = loader.instantiate(cfg, Some((&sweep.parameter, x)))?;
        let r = run_estimate(&inst, cfg, cfg.seed ^ i as u64, execution)?;
        Ok(SweepRow {
            param: x,
            p_hat: r.p_hat,
            n_traces: r.n_traces,
            successes: r.successes,
        })
    };
    let indexed: Vec<(usize, f64)> = points.into_iter().enumerate().collect();
    if parallel_points {
        indexed.into_par_iter().map(one).collect()
    } else {
        indexed.into_iter().map(one).collect()
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "param,p_hat,n_traces,successes")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.param, r.p_hat, r.n_traces, r.successes)?;
    }
    Ok(())
}

fn cmd_sweep(args: &RunArgs, parallel_sweep: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let rows = run_sweep(&cfg, &args.loader(), args.execution(), parallel_sweep)?;
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_sweep_csv(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_sweep_csv(&rows, out)?,
    }
    Ok(())
}

fn cmd_check_data(path: &Path, unit: TimeUnit, policy: ReliabilityPolicy, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = load_dataset_with(path, unit, ParseMode::Tolerant)
        .map_err(|e| CliError::Dataset(e.to_string()))?;
    let report = validate_dataset(&ds, &policy);
    write_json(&report, out, None)?;
    if report.reliable {
        Ok(())
    } else {
        Err(CliError::Unreliable)
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Estimate(a) => cmd_estimate(a, out),
        Command::Test {
            run,
            theta,
            epsilon,
            beta,
            max_samples,
        } => cmd_test(run, *theta, *epsilon, *beta, *max_samples, out),
        Command::Sweep { run, parallel_sweep } => cmd_sweep(run, *parallel_sweep, out),
        Command::CheckData {
            path,
            unit,
            max_gap_days,
            min_rows,
        } => cmd_check_data(
            path,
            *unit,
            ReliabilityPolicy {
                max_gap_seconds: max_gap_days * 86_400.0,
                min_rows: *min_rows,
            },
            out,
        ),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
