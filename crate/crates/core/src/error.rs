use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_diagonal:e}, tolerance {tolerance:e})")]
    NoConvergence {
        sweeps: usize,
        off_diagonal: f64,
        tolerance: f64,
    },

    #[error("calibration impossible: {skipped} of {total} sampled pairs have zero distance")]
    CalibrationImpossible { skipped: usize, total: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// True for errors caused by inconsistent inputs or parameters rather than
    /// by the environment or numerics.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::DimensionMismatch { .. } | Error::InvalidInput(_)
        )
    }
}
