use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fairwasp::Metric;

#[derive(Debug, Parser)]
#[command(name = "fairwasp", version, about = "Fair integer reweighting of classification data")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for integer weights under marginal demographic parity.
    Solve(SolveArgs),
    /// Solve under pairwise demographic parity.
    SolvePw(SolvePwArgs),
    /// Report conditionals, margins and violations of a weight vector.
    Verify(VerifyArgs),
    /// Repeat each input row as many times as its weight.
    Materialize(MaterializeArgs),
    /// Write a synthetic benchmark dataset.
    Synth(SynthArgs),
    /// Time compress and solve on synthetic data of doubling size.
    Bench(BenchArgs),
    /// Brute-force reference solve for tiny inputs.
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Protected attribute column.
    #[arg(long, default_value = "d")]
    pub d_col: String,
    /// Outcome column.
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Also use the protected column as a feature.
    #[arg(long)]
    pub include_d_in_features: bool,
    /// Skip scaling features to unit standard deviation.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long, default_value = "euclidean")]
    pub metric: Metric,
    /// Directory for cached compressed cost tables.
    #[arg(long)]
    pub cost_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Initial dual box bound; derived from the costs when omitted.
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Keep only the y = 0 rows when the outcome is binary.
    #[arg(long)]
    pub dedup_binary_y: bool,
    /// Skip the integer branch-and-bound stage.
    #[arg(long)]
    pub no_branch: bool,
    #[arg(long, default_value_t = 2000)]
    pub max_nodes: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Weights CSV; the manifest goes to `<out>.manifest.json`.
    #[arg(long, default_value = "weights.csv")]
    pub out: PathBuf,
    /// Print the manifest to stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SolvePwArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 200)]
    pub nm_max_evals: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub nm_tol: f64,
    #[arg(long, default_value_t = 2)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "weights.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Weights CSV, or `uniform`.
    #[arg(long, default_value = "uniform")]
    pub weights: String,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct MaterializeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub n_start: usize,
    #[arg(long, default_value_t = 6400)]
    pub n_end: usize,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub gap_tol: f64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OracleMode {
    Mip,
    Lp,
    Pairwise,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "mip")]
    pub mode: OracleMode,
}
