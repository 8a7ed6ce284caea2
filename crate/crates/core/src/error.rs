use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The correlation at the smallest allowed sigma is still below the target.
    #[error("target correlation {target} unreachable: ceiling at minimum sigma is {ceiling:.4}")]
    UnreachableTarget { target: f64, ceiling: f64 },

    /// The correlation at the largest allowed sigma is still above the target.
    #[error("target correlation {target} not bracketed: floor at maximum sigma is {floor:.4}")]
    NonBracketing { target: f64, floor: f64 },

    #[error("sigma search stalled at {sigma} with correlation {achieved:.4} (target {target})")]
    CalibrationStalled {
        target: f64,
        sigma: f64,
        achieved: f64,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("observed correlation {observed} outside attainable range [{min:.4}, {max:.4}]")]
    OutOfRange { observed: f64, min: f64, max: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("slice is not rectangular: {0}")]
    NonRectangular(String),

    #[error("run spec: {0}")]
    RunSpec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Calibration failures that the engine records as skipped cells.
    pub fn is_unreachable(&self) -> bool {
        matches!(
            self,
            Error::UnreachableTarget { .. }
                | Error::NonBracketing { .. }
                | Error::CalibrationStalled { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
