use std::path::{Path, PathBuf};

use cohortfair::cohort::CohortError;
use cohortfair::eval::EvalError;
use cohortfair::scenario::ScenarioError;
use cohortfair::strategies::StrategyError;
use thiserror::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {path}: {message}")]
    Config { path: String, message: String },
    #[error("io: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cohort: {}: {source}", path.display())]
    Cohort {
        path: PathBuf,
        #[source]
        source: CohortError,
    },
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("strategies: scenario {scenario}, seed {seed}, {strategy}: {source}")]
    Strategy {
        scenario: String,
        seed: u64,
        strategy: String,
        #[source]
        source: StrategyError,
    },
    #[error("fairness_eval: {0}")]
    Eval(#[from] EvalError),
    #[error("data: {0}")]
    Data(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Scenario(e) => match e.root() {
                ScenarioError::Capacity { .. } | ScenarioError::NotOptimal(_) | ScenarioError::Lp(_) => EXIT_INFEASIBLE,
                ScenarioError::InvalidSpec(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            },
            CliError::Strategy {
                source: StrategyError::Config(_),
                ..
            } => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}
