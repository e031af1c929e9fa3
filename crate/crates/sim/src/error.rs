use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error("scenario construction failed: {0}")]
    Scenario(String),
    #[error("invalid world state: {0}")]
    State(String),
    /// Raised by the car-following law when the bumper gap is not positive.
    #[error("non-positive gap {gap} m passed to the car-following model")]
    Collision { gap: f64 },
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
