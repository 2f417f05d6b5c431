use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or unsupported file layout.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// Structurally valid input whose contents break an invariant.
    #[error("data error: {0}")]
    Data(String),

    /// A non-finite entry in an embedding matrix.
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// A stored basis that is no longer orthonormal.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dim { expected: usize, actual: usize },

    /// Rank selection kept every axis, so the subspace would not restrict anything.
    #[error("degenerate subspace: k = {k} equals the working dimension")]
    Degenerate { k: usize },

    #[error("input is orthogonal to the subspace (projected/input norm ratio {ratio:e})")]
    OrthogonalInput { ratio: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }

    /// Process exit code for the command-line tool: 2 configuration, 3 data, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 4,
            Error::Format { .. }
            | Error::Data(_)
            | Error::NonFinite { .. }
            | Error::Integrity(_)
            | Error::Dim { .. }
            | Error::Degenerate { .. }
            | Error::OrthogonalInput { .. } => 3,
        }
    }
}
