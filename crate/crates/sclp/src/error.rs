//! Error type shared by every stage of the toolkit.

use std::path::{Path, PathBuf};

/// Errors surfaced by segmentation, feature extraction, training and inference.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The caller handed us something malformed: bad dimensions, ids out of
    /// range, negative vote mass, a palette that is too short, and so on.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A persisted artifact required by the requested stage is absent.
    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    /// Not enough data to fit the requested statistic or model.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A loaded or constructed model violates its own invariants
    /// (e.g. a fusion row whose weights sum to zero).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Underlying I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents, annotated with path and 1-based line.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_input(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    pub fn insufficient_data(message: impl Into<String>) -> Self {
        Error::InsufficientData(message.into())
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            line,
            message: message.into(),
        }
    }
}
