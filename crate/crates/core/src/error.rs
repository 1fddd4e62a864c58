use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("window/hop combination not invertible")]
    NotInvertible,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient duration: {frames} analysis frames, need {needed}")]
    InsufficientDuration { frames: usize, needed: usize },

    #[error("duration mismatch: audio {audio_secs:.4} s, video {video_secs:.4} s")]
    DurationMismatch { audio_secs: f64, video_secs: f64 },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("unsupported channel count {0}, only mono is supported")]
    MultiChannel(u16),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite objective at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
