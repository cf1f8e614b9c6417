//! Crate-wide error type and the CLI exit-code taxonomy.

use std::path::PathBuf;

/// Errors produced by the evaluation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Caller passed an out-of-contract argument (bad fraction, unknown
    /// metric name, order out of range, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data is unusable (empty corpus, missing topics, dimension
    /// mismatch between data sets, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An external (or builtin) sample model failed to produce samples.
    #[error("model failed: {0}")]
    ModelFailed(String),

    /// A search or replication run ended with too few successful trials.
    /// Carries every trial record gathered so the caller can inspect what
    /// went wrong.
    #[error("search failed: {message}")]
    SearchFailed {
        message: String,
        records: Vec<crate::protocol::TrialRecord>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 data/format, 3 numerical,
    /// 4 external-model failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::Io { .. } | Error::Format { .. } | Error::InvalidInput(_) => 2,
            Error::Numerical(_) => 3,
            Error::ModelFailed(_) | Error::SearchFailed { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
