use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image dimensions {height}x{width}")]
    Dimensions { height: usize, width: usize },

    #[error("image data length {len} does not match {height}x{width}")]
    DataLength {
        len: usize,
        height: usize,
        width: usize,
    },

    #[error("pixel value {0} outside [0, 1]")]
    PixelRange(f64),

    #[error("cannot decode image {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("cannot encode image: {0}")]
    Encode(#[source] image::ImageError),

    #[error("degenerate histogram: image has a single intensity level")]
    DegenerateHistogram,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("profile too short: length {0}, need at least 3")]
    ProfileTooShort(usize),

    #[error("systems do not fit on the page: {0}")]
    DoesNotFit(String),

    #[error("region out of bounds: {0}")]
    RegionOutOfBounds(String),

    #[error("weight file: bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("weight file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("weight file: duplicate tensor name {0:?}")]
    DuplicateTensor(String),

    #[error("weight file: invalid tensor name: {0}")]
    InvalidTensorName(String),

    #[error("tensor {name:?}: {reason}")]
    TensorShape { name: String, reason: String },

    #[error("missing tensor {0:?}")]
    MissingTensor(String),

    #[error("unexpected tensor {0:?} not in network spec")]
    UnexpectedTensor(String),

    #[error("non-finite value in tensor {0:?}")]
    NonFinite(String),

    #[error("duplicate sample path {0}")]
    DuplicateSample(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
