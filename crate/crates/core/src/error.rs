use thiserror::Error;

/// Errors raised by the pointwise model operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} = {value} lies outside the open interval (0, 1)")]
    OutOfDomain { what: String, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("growth matrix is not symmetric: a[{row}][{col}] = {upper} but a[{col}][{row}] = {lower}")]
    AsymmetricGrowth {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },
}

/// Failures of a single implicit step or of a whole run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("Newton iteration did not converge at step {step} (best residual {best_norm:.3e})")]
    NonConvergence { step: usize, best_norm: f64 },
    #[error("singular Jacobian at step {step}")]
    SingularJacobian { step: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
