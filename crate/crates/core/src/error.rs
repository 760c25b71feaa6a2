use thiserror::Error;

use crate::config::Violation;

/// Errors raised by oracles, solvers and trace tooling.
#[derive(Debug, Error)]
pub enum DcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported problem: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("invariant violated at iteration {k}: {inequality} (slack {slack:e})")]
    InvariantViolation { inequality: String, k: usize, slack: f64 },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("trace format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, DcError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(DcError::DimensionMismatch { expected, got });
    }
    Ok(())
}
