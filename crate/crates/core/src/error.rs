use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    /// The mean spin projection used as phase reference is (numerically) zero.
    #[error("phase reference lost: |<Jx>| = {mean_jx:e} below threshold {threshold:e}")]
    PhaseReferenceLost { mean_jx: f64, threshold: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("propagation step rejected: error estimate {estimate:e} exceeds {tolerance:e}; reduce dt")]
    StepRejected { estimate: f64, tolerance: f64 },

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::StepRejected { .. }
                | Error::PhaseReferenceLost { .. }
                | Error::InvalidBracket(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
