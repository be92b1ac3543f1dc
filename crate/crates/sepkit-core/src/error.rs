use alloc::string::String;
use thiserror::Error;

/// Errors surfaced by the separation primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    /// A signal, set, or matrix argument was empty where data is required.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Two arguments that must agree in length or shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A scalar parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A linear system was singular or numerically unsolvable.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// The requested problem size exceeds a hard guard rail.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
}
