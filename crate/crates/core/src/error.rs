use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}, line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{what} out of range ({value}), line {line}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        line: u64,
    },

    #[error("{path}: {message}")]
    Raster { path: PathBuf, message: String },

    #[error("raster dimension mismatch: segmentation {seg_width}x{seg_height}, activation {cam_width}x{cam_height}")]
    DimensionMismatch {
        seg_width: usize,
        seg_height: usize,
        cam_width: usize,
        cam_height: usize,
    },

    /// A value violated a documented precondition of a pure operation.
    #[error("{0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the file system rather than by input content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
