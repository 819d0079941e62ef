use thiserror::Error;

/// Errors raised while building or solving a dispatch problem.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("dimension mismatch: expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unit {unit}: invalid `{field}` ({reason})")]
    InvalidUnit {
        unit: usize,
        field: &'static str,
        reason: String,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid loss matrix: {0}")]
    InvalidLossMatrix(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("solver `{solver}` failed: {reason}")]
    SolverFailure { solver: String, reason: String },
}

pub type Result<T> = std::result::Result<T, DispatchError>;

pub(crate) fn invalid_param(name: &'static str, reason: impl Into<String>) -> DispatchError {
    DispatchError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
