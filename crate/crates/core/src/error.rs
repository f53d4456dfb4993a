use thiserror::Error;

/// Errors produced by oracles, approximators and matrix I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("oracle returned non-finite value {value} at ({i}, {j})")]
    NonFinite { i: usize, j: usize, value: f64 },

    #[error("oracle failed at ({i}, {j}): {message}")]
    Oracle { i: usize, j: usize, message: String },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("matrix is not positive semidefinite: lambda_min = {lambda_min:e}")]
    NotPsd { lambda_min: f64 },

    #[error("shifted inner matrix is indefinite in {mode} mode: lambda_min = {lambda_min:e}")]
    ShiftedIndefinite { mode: &'static str, lambda_min: f64 },

    #[error("factor has mixed signs; embed with signs retained or use the shifted (sms) method")]
    IndefiniteFactor,

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("relative error undefined for a zero reference matrix")]
    UndefinedMetric,

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for failures that originate in floating-point linear algebra.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NotSymmetric { .. }
                | Error::NotPsd { .. }
                | Error::ShiftedIndefinite { .. }
                | Error::IndefiniteFactor
                | Error::NoConvergence(_)
                | Error::UndefinedMetric
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
