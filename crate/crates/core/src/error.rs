use std::path::PathBuf;

use thiserror::Error;

use crate::tracker::TrackPoint;

/// Errors raised while decoding or encoding grayscale rasters.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image file not found: {0}")]
    NotFound(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image is not 8-bit grayscale: {0}")]
    NotGrayscale(String),
    #[error("malformed image data: {0}")]
    Malformed(String),
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors raised while reading a configuration file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: invalid value for `{key}`: {value}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pipeline-level failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("image {width}x{height} is smaller than the {tiles}x{tiles} tile grid")]
    ImageTooSmall {
        width: usize,
        height: usize,
        tiles: usize,
    },
    #[error("point ({x:.2}, {y:.2}) is closer than {margin:.2} px to the image border")]
    NearBorder { x: f64, y: f64, margin: f64 },
    #[error("degenerate initial mask: {0}")]
    DegenerateInit(&'static str),
    #[error("no ridge points")]
    EmptyRidgeSet,
    #[error("index {index} out of range for {len} points")]
    OutOfRange { index: usize, len: usize },
    #[error("non-positive mean diameter {0}")]
    NonPositiveMean(f64),
    #[error("length mismatch: {0} estimated vs {1} reference values")]
    LengthMismatch(usize, usize),
    #[error("no values to summarize")]
    EmptyInput,
    #[error("non-positive reference diameter {0} at index {1}")]
    NonPositiveReference(f64, usize),
    #[error("point ({x:.2}, {y:.2}) lies outside the image")]
    OutsideImage { x: f64, y: f64 },
    #[error("neither direction reached the endpoint")]
    Unreachable { partial: Vec<Vec<TrackPoint>> },
    #[error("invalid phantom: {0}")]
    Phantom(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
