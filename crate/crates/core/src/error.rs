use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("length mismatch: header declares {expected} samples, payload holds {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{0} is undefined for this signal")]
    UndefinedMetric(&'static str),

    #[error("training diverged at iteration {iteration}: non-finite cost")]
    Divergence { iteration: usize },

    #[error("need {needed} frames, only {available} available")]
    InsufficientFrames { needed: usize, available: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
