//! Experiment orchestration: dataset preparation, factorization, training
//! runs, one-key sweeps, multi-seed benchmarks and slate NDCG evaluation.
//! Every command writes tidy CSV plus a `summary.csv` into its output
//! directory.

mod config;
mod runner;

pub use config::{set_path, AgentSection, DatasetSection, ExperimentSection, HarnessConfig};
pub use runner::{
    build_agent, load_simulator, run_benchmark, run_factorize, run_ingest, run_slate_eval, run_sweep, run_training,
    slate_episode, train_run, BenchmarkReport, BenchmarkRow, ExperimentPlan, IngestSummary, SlateReport, SlateRow,
    SweepReport, SweepRow, TrainingReport,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::agents::AgentError;
use crate::environment::EnvError;
use crate::ingest::IngestError;
use crate::metrics::MetricsError;
use crate::replay::ReplayError;
use crate::simulator::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("factorization file {0} not found; run `factorize` first")]
    MissingFactorization(PathBuf),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Simulator(#[from] SimError),
    #[error(transparent)]
    Environment(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Process exit status for a failed command.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_OTHER: i32 = 1;

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::Environment(EnvError::InvalidConfig(_)) => EXIT_CONFIG,
            HarnessError::Agent(AgentError::InvalidConfig(_) | AgentError::KTooLarge { .. }) => EXIT_CONFIG,
            HarnessError::Agent(AgentError::Replay(ReplayError::InvalidConfig(_))) => EXIT_CONFIG,
            HarnessError::Data(_) | HarnessError::MissingFactorization(_) | HarnessError::Ingest(_) => EXIT_DATA,
            HarnessError::Simulator(SimError::InvalidOptions(_)) => EXIT_CONFIG,
            HarnessError::Simulator(_) => EXIT_DATA,
            _ => EXIT_OTHER,
        }
    }
}
