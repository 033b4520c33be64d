use thiserror::Error;

/// Errors raised by the library.
///
/// Contract violations are programming errors on the caller's side (wrong
/// dimension, calling `tell` before `ask`, invalid configuration). Evaluation
/// failures come from the wrapped forward model and carry the parameters that
/// triggered them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("evaluation failed at {parameters:?}: {reason}")]
    Evaluation { parameters: Vec<f64>, reason: String },

    #[error("rejection sampling gave up after {draws} draws at iteration {iteration}")]
    RejectionCapExceeded { draws: u64, iteration: usize },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dimension(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
