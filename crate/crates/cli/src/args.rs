use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "trunc-fpca",
    version,
    about = "Functional PCA for truncated noisy functional data"
)]
pub struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (falls back to TRUNC_FPCA_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More logging; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulated dataset and its truth.
    Simulate(SimulateArgs),
    /// Stage 1: mean and total variance curves.
    FitMean(FitMeanArgs),
    /// Stages 1-2: latent covariance, noise variance and eigen system.
    FitCov(FitCovArgs),
    /// Stage 3: principal component scores.
    Scores(ScoresArgs),
    /// Regress a scalar outcome on scores and covariates.
    Gflm(GflmArgs),
    /// Rerun the simulation tables.
    Reproduce(ReproduceArgs),
    /// Check a dataset and report every problem found.
    Validate(DataArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Long CSV with columns unit_id, time, value and optionally flag.
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    /// Lower recording bound.
    #[arg(long, allow_negative_numbers = true)]
    pub lower: Option<f64>,
    /// Upper recording bound.
    #[arg(long, allow_negative_numbers = true)]
    pub upper: Option<f64>,
    /// Derive flags from values equal to a bound instead of a flag column.
    #[arg(long)]
    pub infer_flags: bool,
    /// Rescale observation times onto [0, 1].
    #[arg(long)]
    pub rescale_time: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub case: u8,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub g: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitMeanArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of equally spaced estimation gridpoints on [0, 1].
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Candidate bandwidths for cross-validation.
    #[arg(long, value_delimiter = ',')]
    pub bandwidths: Option<Vec<f64>>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitCovArgs {
    #[command(flatten)]
    pub fit: FitMeanArgs,
    /// Reuse a stage-1 fit instead of recomputing it.
    #[arg(long, value_name = "JSON")]
    pub mean: Option<PathBuf>,
    /// Fixed covariance bandwidth (skips pseudo-likelihood selection).
    #[arg(long)]
    pub cov_bandwidth: Option<f64>,
    /// Candidate multiples of the stage-1 bandwidth.
    #[arg(long, value_delimiter = ',')]
    pub cov_multiples: Option<Vec<f64>>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Seed for the sweep order.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScoresArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "JSON")]
    pub mean: PathBuf,
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    /// Number of components (default: FVE rule).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub fve: Option<f64>,
    /// Monte Carlo draws per unit.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LinkArg {
    Identity,
    Logit,
}

#[derive(Debug, Args)]
pub struct GflmArgs {
    /// Scores CSV from the scores command.
    #[arg(long, value_name = "CSV")]
    pub scores: PathBuf,
    /// CSV keyed by unit_id holding the response and any covariates.
    #[arg(long, value_name = "CSV")]
    pub outcomes: PathBuf,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long, value_enum)]
    pub link: Option<LinkArg>,
    /// Number of components (default: all in the scores file).
    #[arg(long)]
    pub k: Option<usize>,
    /// Use the plain BLUP column instead of the Monte Carlo scores.
    #[arg(long)]
    pub nontruncated: bool,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Gflm,
    All,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, value_enum)]
    pub table: TableArg,
    /// 25 replicates of n = 60.
    #[arg(long)]
    pub fast: bool,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}
