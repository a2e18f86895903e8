use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot read image '{path}': {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("malformed annotation for '{image_id}': {message}")]
    Xml { image_id: String, message: String },

    #[error("unknown damage class '{0}' (expected one of D00, D10, D20, D40)")]
    UnknownClass(String),

    #[error("cannot derive country from image id '{0}' (expected Czech_, India_ or Japan_ prefix)")]
    UnknownCountry(String),

    #[error("invalid bounding box ({xmin}, {ymin}, {xmax}, {ymax}): {reason}")]
    InvalidBox {
        xmin: i64,
        ymin: i64,
        xmax: i64,
        ymax: i64,
        reason: &'static str,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown image id '{0}' (not present in the ground-truth dataset)")]
    UnknownImage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Data(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data itself.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
