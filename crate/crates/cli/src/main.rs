use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod commands;
mod output;

#[derive(Debug, Parser)]
#[command(name = "mixbasis", version, about = "Basis-function mixture models: EM and collapsed Gibbs fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply column transforms and write the result as CSV.
    Transform(TransformArgs),
    /// Fit a k-component mixture by EM.
    FitEm(FitEmArgs),
    /// Sample (k, g, h) with the collapsed Gibbs sampler.
    FitGibbs(FitGibbsArgs),
    /// Recompute summaries from a stored sample file.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic benchmark data set.
    Synth(SynthArgs),
    /// Print the exact posterior of a tiny data set.
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Numeric CSV, one row per observation.
    #[arg(long)]
    pub input: PathBuf,
    /// The first row holds values, not item names.
    #[arg(long)]
    pub no_header: bool,
    /// `cdf`, `mean_half`, `linear`, `likert[:L]`, `identity`, or
    /// `name=transform,...` per item.
    #[arg(long)]
    pub transform: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// `bernstein:d=3`, `gamma:T=5`, `tophat:T=8`, `gauss:T=7`, `trig:T=5`,
    /// `file:<path>`; repeat as `item=spec` for per-item bases.
    #[arg(long, required = true)]
    pub basis: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TransformArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitEmArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of components.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth labels (last CSV column) to score the fit against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitGibbsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Burn-in sweeps (one sweep is N steps).
    #[arg(long, default_value_t = 2500)]
    pub burn_in: u64,
    /// Sampling sweeps after burn-in.
    #[arg(long, default_value_t = 25_000)]
    pub sweeps: u64,
    /// Sweeps between recorded samples.
    #[arg(long, default_value_t = 1)]
    pub stride: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `uniform` or `table:<path>` with one probability per line.
    #[arg(long, default_value = "uniform")]
    pub prior: String,
    /// `all-in-one`, `singletons` or `random:K`.
    #[arg(long, default_value = "all-in-one")]
    pub init: String,
    /// Write samples to disk as they are drawn instead of holding them.
    #[arg(long)]
    pub stream_consensus: bool,
    #[arg(long, default_value_t = 1024)]
    pub memory_budget_mb: usize,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Sample file written by `fit-gibbs`.
    #[arg(long, alias = "input")]
    pub samples: PathBuf,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
pub enum Benchmark {
    Synth1,
    Synth2,
    Small,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "synth1")]
    pub which: Benchmark,
    /// Total observations for `small`.
    #[arg(long, default_value_t = 75)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "uniform")]
    pub prior: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Transform(a) => commands::transform(a),
        Command::FitEm(a) => commands::fit_em(a),
        Command::FitGibbs(a) => commands::fit_gibbs(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Synth(a) => commands::synth(a),
        Command::Oracle(a) => commands::oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for usage or configuration problems, 2 for bad data, 3 for guards.
fn exit_code(err: &anyhow::Error) -> u8 {
    use mixbasis::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) | E::Domain(_) => 1,
                E::Guard(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}
