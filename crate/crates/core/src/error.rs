use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum VeqError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("value iteration did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("non-finite loss at step {step}: {loss}")]
    NonFinite { step: usize, loss: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<VeqError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl VeqError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        VeqError::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        VeqError::Invalid(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        VeqError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = VeqError> = std::result::Result<T, E>;
