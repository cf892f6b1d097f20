use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invariant violated: {what} (error {value:.3e}, tolerance {tolerance:.3e})")]
    InvariantViolation {
        what: String,
        value: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Newton projection did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("constraint Jacobian is singular (condition number {condition:.3e})")]
    SingularJacobian { condition: f64 },

    #[error("degenerate frame: Gram-Schmidt pivot {pivot:.3e} below threshold")]
    DegenerateFrame { pivot: f64 },

    #[error("density mismatch for normal index {alpha}: fd {fd_value:.6e} vs algebraic {algebraic_value:.6e}")]
    DensityMismatch {
        alpha: usize,
        fd_value: f64,
        algebraic_value: f64,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("too many failed samples: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invariant(what: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Error::InvariantViolation {
            what: what.into(),
            value,
            tolerance,
        }
    }

    /// Whether the error comes from the Newton solver or frame construction.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::SingularJacobian { .. } | Error::DegenerateFrame { .. }
        )
    }
}
