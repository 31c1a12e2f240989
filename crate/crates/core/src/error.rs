use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("simulation diverged at step {step}")]
    SimulationDiverged { step: usize },

    #[error("scheme failure at step {step}: {reason}")]
    SchemeFailure { step: usize, reason: String },

    #[error("rollout diverged at segment {segment}")]
    RolloutDiverged { segment: usize },

    #[error("training diverged at iteration {iteration} (last finite y0 {last_y0})")]
    TrainingDiverged { iteration: usize, last_y0: f64 },

    #[error("complexity guard: {0}")]
    Complexity(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
