use thiserror::Error;

/// Errors produced by the linear-algebra substrate and the square-root solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off_diagonal:e})")]
    NonConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("non-positive eigenvalue {value:e}")]
    NonPositiveEigenvalue { value: f64 },

    #[error("Pade denominator has a pole: minimum {minimum:e} on [0, 1]")]
    PoleDetected { minimum: f64 },

    #[error("sign iteration diverged at iteration {iteration} (residual {residual:e})")]
    Diverged { iteration: usize, residual: f64 },

    #[error("missing Newton-Schulz trace: {0}")]
    MissingTrace(String),

    #[error("failed to parse matrix: {0}")]
    Parse(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io { path: path.display().to_string(), message: err.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
