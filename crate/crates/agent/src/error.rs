use cgrl_core::NumericError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("observation holds {present} vehicles but capacity is {capacity}")]
    Capacity { present: usize, capacity: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T, E = AgentError> = std::result::Result<T, E>;
