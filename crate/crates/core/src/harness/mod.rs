//! Scenario runner: configuration, seeded experiments, batch statistics and
//! CSV output.

pub mod config;
pub mod output;
pub mod scenario;

use thiserror::Error;

pub use config::{ScenarioConfig, ScenarioKind};
pub use scenario::{
    child_seed, iterations_to_reach, run_batch, run_scenario, BatchAggregate, BatchResult, DriftLogSummary, RunSummary,
    RunTrace, ScenarioResult,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{field}: {message}")]
    Config { field: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Simulation(String),
}

impl HarnessError {
    /// Short category name used in CLI messages.
    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Config { .. } => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::Simulation(_) => "simulation",
        }
    }

    /// Process exit code for the category.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Simulation(_) => 4,
        }
    }
}
