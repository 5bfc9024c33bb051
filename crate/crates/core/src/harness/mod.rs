//! Seeded Monte Carlo runner behind the `qpq-sim` binary.

mod config;
mod report;
mod scenarios;
mod summarize;

pub use config::{ExperimentConfig, Scenario};
pub use report::{ExperimentReport, OutputFormat};
pub use scenarios::run_scenario;
pub use summarize::{summarize, summarize_files};

use crate::chang::ChangError;
use crate::postprocess::PostprocessError;
use crate::quantum::QuantumError;
use crate::yu::YuError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot summarize: {0}")]
    Summarize(String),
    #[error(transparent)]
    Yu(#[from] YuError),
    #[error(transparent)]
    Chang(#[from] ChangError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit status: 2 for rejected configuration, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}
