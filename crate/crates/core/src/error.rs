use thiserror::Error;

/// Errors raised by the modelling and optimization layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    SingularKernel { jitter: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("penalized acquisition value {0} is not positive; log-space gradient undefined")]
    NonPositiveValue(f64),
    #[error("objective evaluation failed: {0}")]
    ObjectiveFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
