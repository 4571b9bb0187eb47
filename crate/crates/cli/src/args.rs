use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Environment variable consulted when `--out` is not given.
pub const OUT_ENV: &str = "COHORTFAIR_OUT";

#[derive(Debug, Parser)]
#[command(name = "cohortfair", version, about = "Sex-controlled skin lesion cohorts and subgroup fairness checks")]
pub struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a metadata file and write train/val/test manifests for every scenario and seed.
    Build(BuildArgs),
    /// Solve one scenario's linear program and print the solution as JSON.
    Solve(SolveArgs),
    /// Train the toy strategies on synthetic data and write predictions and logs.
    TrainToy(TrainToyArgs),
    /// Compute subgroup AUCs and Mann-Whitney comparisons from prediction files.
    Eval(EvalArgs),
    /// Check the standard scenarios against the reference sex counts.
    ReproduceTable1(TableArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub metadata: PathBuf,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Delimited file of (original, duplicate) image id pairs.
    #[arg(long)]
    pub duplicates: Option<PathBuf>,
    #[arg(long, env = OUT_ENV)]
    pub out: PathBuf,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub per_cell: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Scenario name such as M100, F25M75 or F100.
    #[arg(long)]
    pub scenario: String,
    /// Cell counts as `label,sex,age_band,count`; the archive snapshot when omitted.
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    #[arg(long, default_value_t = cohortfair::scenario::DEFAULT_TEST_CELL_SIZE)]
    pub per_cell: u64,
    #[arg(long, default_value_t = 1.0)]
    pub age_ratio: f64,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// base, reinforce, adversarial or all.
    #[arg(long, default_value = "all")]
    pub strategy: String,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Sex-label correlation of the training data.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Plan summary JSON written by `build`; its sizes and female share shape the data.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Scenario tag for the outputs; taken from the plan when one is given.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, env = OUT_ENV)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Glob pattern(s) of prediction files.
    #[arg(long, required = true, num_args = 1..)]
    pub predictions: Vec<String>,
    #[arg(long, env = OUT_ENV)]
    pub out: PathBuf,
    /// Compare per-lesion true-class probabilities instead of per-seed AUCs.
    #[arg(long)]
    pub per_lesion: bool,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    #[arg(long, default_value_t = cohortfair::scenario::DEFAULT_TEST_CELL_SIZE)]
    pub per_cell: u64,
}
