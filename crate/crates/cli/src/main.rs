mod commands;
mod manifest;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Usage errors (unknown subcommand or flag, bad flag value).
const EXIT_USAGE: u8 = 64;
const EXIT_VALIDATION: u8 = 1;
const EXIT_ESTIMATION: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "maxplus-tails", version, about = "Tail decay rates of stochastic (max,plus)-linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for replica-parallel work; results do not depend on it.
    #[arg(long, global = true, env = "MAXPLUS_TAILS_THREADS")]
    threads: Option<usize>,
    /// Add wall-clock time to the run manifest (makes output non-reproducible).
    #[arg(long, global = true)]
    record_time: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a model config.
    Validate(ValidateArgs),
    /// Communication classes, block order and assumption verdicts.
    Analyze(AnalyzeArgs),
    /// Sample stationary maximal daters.
    Simulate(SimulateArgs),
    /// Estimate a block or S cumulant function on a θ grid.
    Mgf(MgfArgs),
    /// Solve for η, the per-class rates and θ*.
    Theta(ThetaArgs),
    /// Fit the tail slope of simulated daters.
    Tailfit(TailfitArgs),
    /// Compare the solver's θ* with the fitted tail slope.
    Crosscheck(CrosscheckArgs),
    /// Optimal routing probability of the two-path resequencing network.
    Optimize(OptimizeArgs),
    /// Run every bundled model through every analysis path.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    /// Model config file.
    #[arg(long, conflicts_with = "builtin")]
    pub model: Option<PathBuf>,
    /// Bundled model: mm1, single_server, tandem_identical, tandem_independent, fork_join, resequencing.
    #[arg(long)]
    pub builtin: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu3: Option<f64>,
    /// Poisson arrival rate; with --model it replaces the config's arrivals.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Routing probability of path 2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ValidateArgs {
    /// Model config file (alternative to --model).
    #[serde(skip)]
    pub path: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Draws for the sampled separability check.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Cap on the backward horizon of each dater; `auto` uses 10^6.
    #[arg(long, default_value = "auto")]
    pub horizon: String,
    /// Skip the pilot stability verdict.
    #[arg(long)]
    pub force: bool,
    /// CSV of (replica, Z, horizon_used, converged).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorArg {
    Cloning,
    Independent,
}

#[derive(Args, Debug, Serialize)]
pub struct MgfArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Class index (1-based) or `S`.
    #[arg(long, default_value = "S")]
    pub block: String,
    /// Product length.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 100_000)]
    pub replicas: usize,
    /// Upper end of the θ grid (default 0.95·η, or 1 when η = ∞).
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub points: usize,
    #[arg(long, value_enum, default_value = "cloning")]
    pub estimator: EstimatorArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV of (theta, lambda_hat, ci, flag).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    AnalyticFirst,
    EmpiricalOnly,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value = "analytic-first")]
    pub method: MethodArg,
    /// Replicas per empirical block curve.
    #[arg(long = "mgf-replicas", default_value_t = 100_000)]
    pub mgf_replicas: usize,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub points: usize,
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long, value_enum, default_value = "cloning")]
    pub estimator: EstimatorArg,
    /// Use this η instead of the computed one.
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ThetaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TailArgs {
    #[arg(long, default_value_t = 100_000)]
    pub replicas: usize,
    /// Quantile window `lo,hi` of the regression.
    #[arg(long, default_value = "0.95,0.999")]
    pub quantile_window: String,
    /// Cap on the backward horizon of each dater; `auto` uses 10^6.
    #[arg(long, default_value = "auto")]
    pub horizon: String,
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct TailfitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub tail: TailArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV of (x, log_ccdf).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct CrosscheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub tail: TailArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV of (x, log_ccdf).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub mu2: f64,
    #[arg(long)]
    pub mu3: f64,
    #[arg(long)]
    pub lambda: f64,
    /// Golden-section search even when the closed form applies.
    #[arg(long)]
    pub numeric: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct SelftestArgs {
    /// Daters per tail fit.
    #[arg(long, default_value_t = 100_000)]
    pub replicas: usize,
    /// Replicas per empirical block curve.
    #[arg(long = "mgf-replicas", default_value_t = 20_000)]
    pub mgf_replicas: usize,
    #[arg(long, default_value = "0.95,0.999")]
    pub quantile_window: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    pub fn estimation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_ESTIMATION, message: message.into() }
    }
}

impl From<maxplus_tails::Error> for Failure {
    fn from(e: maxplus_tails::Error) -> Self {
        let code = if e.is_validation() { EXIT_VALIDATION } else { EXIT_ESTIMATION };
        let message = match &e {
            maxplus_tails::Error::BottomDiagonal { .. } => format!("(ST) violated: {e}"),
            maxplus_tails::Error::Unstable(_) | maxplus_tails::Error::NoDecayRegion(_) => {
                format!("{e} (is the network stable at this load?)")
            }
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_ESTIMATION);
        }
    }
    match commands::dispatch(&cli.command, cli.record_time) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
