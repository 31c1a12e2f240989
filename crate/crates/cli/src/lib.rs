//! Experiment runner for the `sigfbsde` solver.
//!
//! The binary is a thin wrapper; everything lives here so integration tests
//! can drive the pipeline without spawning processes.

pub mod cache;
pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Diverged(String),
    #[error(transparent)]
    Core(sigfbsde::Error),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<sigfbsde::Error> for CliError {
    fn from(e: sigfbsde::Error) -> Self {
        use sigfbsde::Error as E;
        match e {
            E::Argument(_) | E::Complexity(_) => CliError::Validation(e.to_string()),
            E::TrainingDiverged { .. } | E::RolloutDiverged { .. } | E::SimulationDiverged { .. } => {
                CliError::Diverged(e.to_string())
            }
            e => CliError::Core(e),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(format!("csv: {e}"))
    }
}

impl CliError {
    /// Process exit code: 2 for bad input, 3 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Diverged(_) => 3,
            _ => 1,
        }
    }
}
