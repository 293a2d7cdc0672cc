use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the benchmark library.
///
/// `Config` variants are user-facing validation failures (bad maps, bad
/// parameters, malformed config files); everything else is a runtime failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    ConfigAt {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("map error: {0}")]
    Map(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot schema mismatch: {0}")]
    Schema(String),

    #[error("trial aborted: {0}")]
    Aborted(String),
}

impl Error {
    /// Whether the error stems from user input rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::ConfigAt { .. } | Error::Map(_) | Error::Read { .. } | Error::Schema(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
