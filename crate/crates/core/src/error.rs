use crate::prelude::*;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the model and learner operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The mean resultant length of a sample is zero, so no mean direction exists.
    #[error("mean direction undefined for column {column}: zero resultant length")]
    UndefinedDirection { column: usize },

    #[error("stereographic projection is singular at angle pi")]
    Singularity,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A parent does not precede its child in the node ordering.
    #[error("vertex {parent} does not precede its child {child} in the ordering")]
    AcyclicityViolation { parent: usize, child: usize },

    /// Singular or ill-conditioned matrices, rank-deficient samples.
    #[error("numerical failure: {message}")]
    Numerical { message: String },

    /// The optimizer hit its iteration cap; `best` is the best iterate found.
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:e})")]
    ConvergenceFailure {
        iterations: usize,
        gradient_norm: f64,
        objective: f64,
        best: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical {
            message: message.into(),
        }
    }
}
