use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Validation findings are not errors (see [`crate::types::validate_record`]);
/// this type covers I/O, malformed data and violated operation preconditions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate video_id {0:?}")]
    DuplicateVideo(String),

    #[error("video {video_id:?}: expected {expected} values, found {found}")]
    LengthMismatch {
        video_id: String,
        expected: usize,
        found: usize,
    },

    #[error("video {video_id:?}: non-finite score at bin {bin}")]
    NonFiniteScore { video_id: String, bin: usize },

    #[error("video id mismatch: {left:?} vs {right:?}")]
    VideoMismatch { left: String, right: String },

    #[error("missing video ids: {missing:?}; unexpected video ids: {extra:?}")]
    CoverageMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("model {0:?} listed in ensemble spec but has no scores")]
    MissingModel(String),

    #[error("scores required to prune infeasible set")]
    ScoresRequired,

    #[error("boundary {value} outside (0, {duration}) for video {video_id:?}")]
    BoundaryOutOfRange {
        video_id: String,
        value: f64,
        duration: f64,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite loss at epoch {epoch}: {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
