use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a constraint. `field` is the dotted
    /// path of the offending entry.
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Chunk pushed into a request queue out of playback order.
    #[error("user {user}: expected chunk {expected}, got chunk {got}")]
    Sequencing { user: usize, expected: u32, got: u32 },

    #[error("chunk index {index} out of range 1..={len}")]
    ChunkIndex { index: u32, len: u32 },

    #[error("{0}")]
    Domain(String),

    #[error("trace {path}: {reason}")]
    Trace { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
