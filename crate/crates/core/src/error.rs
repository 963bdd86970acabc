use thiserror::Error;

/// Errors raised by the filter, simulator and metric code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{function} is undefined for argument {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mixture weights {w1} and {w2} must be in [0, 1] and sum to one")]
    InvalidWeights { w1: f64, w2: f64 },

    #[error("gamma merge did not converge after {iterations} iterations (residual {residual:e})")]
    MergeDidNotConverge { iterations: usize, residual: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("malformed fixture line {line}: {reason}")]
    Fixture { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
