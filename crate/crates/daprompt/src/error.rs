//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A corpus line failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A referential or structural invariant was violated.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Bad configuration (thresholds, fold counts, variant flags, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A prompt instance cannot fit the backbone even after truncation.
    #[error("instance too long: {len} tokens exceed limit {max}")]
    InstanceTooLong { len: usize, max: usize },

    /// The training loss became non-finite.
    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
