use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) is outside the {width}x{height} image")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: u32,
        height: u32,
    },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid kernel spec: size={size}, direction={direction}")]
    InvalidKernelSpec { size: i32, direction: i32 },

    #[error("region has no foreground pixels")]
    EmptyRegion,

    #[error("grid collapses inside the box: {0}")]
    DegenerateGrid(String),

    #[error("box of area {area} is too small for target area ratio {ratio}")]
    BoxTooSmall { area: u64, ratio: f64 },

    #[error("color ({0}, {1}, {2}) has no registered name")]
    UnnamedColor(u8, u8, u8),

    #[error("invalid prompt style: {0}")]
    InvalidStyle(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("backend timed out after {attempts} attempt(s)")]
    BackendTimeout { attempts: u32 },

    #[error("backend error (status {status}): {message}")]
    BackendError { status: u16, message: String },

    #[error("could not decode backend response: {0}")]
    Decode(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("skip rate {rate:.3} exceeds the allowed {max}")]
    SkipRateExceeded { rate: f64, max: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than by the
    /// environment or a remote backend.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::BackendTimeout { .. }
                | Error::BackendError { .. }
                | Error::Decode(_)
                | Error::Io { .. }
                | Error::Image { .. }
                | Error::SkipRateExceeded { .. }
        )
    }

    /// Errors worth retrying against a remote backend.
    pub fn is_transient(&self) -> bool {
        match self {
            Error::BackendTimeout { .. } => true,
            Error::BackendError { status, .. } => *status == 0 || *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
