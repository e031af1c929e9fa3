use thiserror::Error;

/// Failures raised by the numeric layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("eigensolver did not converge within {sweeps} sweeps (off-diagonal norm {residual:e})")]
    Convergence { sweeps: usize, residual: f64 },
}

pub type Result<T, E = NumericError> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(NumericError::Shape(msg.into()))
}
