//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;

/// Failure modes surfaced by the discrete operators and solvers.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two fields (or a field and an operator) belong to different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An iterative solver hit its iteration cap. Carries the best residual
    /// reached so the caller can decide whether the partial answer is usable.
    #[error("{what} did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    /// The Newton linearization is singular or near-singular (the inner
    /// symmetric solve stagnated), e.g. at a degenerate solution.
    #[error("degenerate linearization: {0}")]
    DegenerateLinearization(String),

    /// A structural hypothesis on (N, p, r) or the sign condition on the
    /// forcing is violated.
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    /// Homotopy continuation failed before reaching the target forcing.
    /// Carries the partial trace accumulated up to the failure.
    #[error("continuation failed: {reason}")]
    ContinuationFailed {
        reason: String,
        trace: Box<crate::solver::ContinuationTrace>,
    },

    /// CSV or config text could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure while reading or writing artifacts.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
