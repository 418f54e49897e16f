use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("shape mismatch in layer `{layer}`: expected {expected:?}, got {got:?}")]
    Shape {
        layer: String,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("format error at byte offset {offset}: {msg}")]
    Format { offset: usize, msg: String },

    #[error("incompatible checkpoint: {0}")]
    Compatibility(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("config error at line {line}, key `{key}`: {msg}")]
    Config {
        key: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn length(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Length {
            what,
            expected,
            got,
        }
    }
}
