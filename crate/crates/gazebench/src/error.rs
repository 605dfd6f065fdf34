use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A value fed into a computation was outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration or tuning parameter was out of range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// A statistic has no defined value for the given data.
    #[error("undefined statistic: {0}")]
    Undefined(String),

    /// There was nothing to work on.
    #[error("empty data: {0}")]
    EmptyData(String),

    /// Network optimisation produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    /// A calibration marker never reached a stable fixation.
    #[error("calibration stalled on marker {marker}: no completion within {max_samples} samples")]
    CalibrationStalled { marker: usize, max_samples: usize },

    /// The cursor engine was driven before it had a usable mapping.
    #[error("engine not ready: {0}")]
    NotReady(String),

    /// Structured text input failed to parse. Line numbers are 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
