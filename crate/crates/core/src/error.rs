use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a domain invariant (non-positive box, asymmetric covariance, ...).
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate innovation covariance")]
    DegenerateInnovation,

    #[error("cannot normalize zero feature")]
    ZeroFeature,

    #[error("degenerate feature average")]
    DegenerateFeatureAverage,

    #[error("no tracks to score")]
    NoTracks,

    #[error("feature required by association mode (detection {frame}:{index})")]
    FeatureRequired { frame: u64, index: usize },

    #[error("empty ground truth")]
    EmptyGroundTruth,

    #[error("detection from frame {found} passed to step for frame {expected}")]
    FrameMismatch { expected: u64, found: u64 },

    #[error("cannot place identity centroids: {0}")]
    CentroidPlacement(String),

    #[error("config {key}: {message}")]
    Config { key: String, message: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
