//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
///
/// Variants are grouped by where they surface: shape/domain problems from the
/// numeric code, ingestion/validation problems from data loading, and
/// state problems from checkpoints and training.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not agree for the requested operation.
    #[error("dimension mismatch in {context}: {left:?} vs {right:?}")]
    Dimension {
        context: String,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// An argument is outside its domain (negative frequency, empty input, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Data fails a declared invariant (annotation out of range, bad header, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A dataset could not be assembled (missing pair, length mismatch, ...).
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// A configuration value or key is unusable.
    #[error("config error: {0}")]
    Config(String),

    /// A checkpoint file is malformed, truncated or of the wrong version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training or inference produced a non-finite value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A multi-run driver failed part-way; lists the seeds that completed.
    #[error("partial results (completed seeds {completed:?}): {source}")]
    PartialRuns {
        completed: Vec<u64>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn dimension(context: impl Into<String>, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            context: context.into(),
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
