use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("cannot ingest {what}: {message}")]
    Ingest { what: String, message: String },

    #[error("malformed tar in layer {layer} at byte offset {offset}: {message}")]
    MalformedTar {
        layer: usize,
        offset: u64,
        message: String,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unknown package {0}")]
    UnknownPackage(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("missing source object {0}")]
    MissingSource(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for bad inputs, 3 for contract violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_) | Error::UnknownPackage(_) => 3,
            _ => 2,
        }
    }

    /// Short machine-readable tag used in JSON error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Ingest { .. } => "ingest",
            Error::MalformedTar { .. } => "malformed-tar",
            Error::Parse { .. } => "parse",
            Error::Contract(_) => "contract",
            Error::UnknownPackage(_) => "unknown-package",
            Error::MissingInput(_) => "missing-input",
            Error::MissingSource(_) => "missing-source",
        }
    }
}
