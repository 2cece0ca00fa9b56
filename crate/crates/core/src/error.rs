use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the imaging pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frequency grid too coarse: spacing {spacing} cyc/um exceeds {limit} cyc/um")]
    GridTooCoarse { spacing: f64, limit: f64 },

    #[error("frequency grid extent {extent} cyc/um does not cover the cutoff {cutoff} cyc/um")]
    GridTooSmall { extent: f64, cutoff: f64 },

    #[error("PSF kernel of size {size} discards {tail:e} of the kernel energy (limit {limit:e})")]
    KernelTooSmall { size: usize, tail: f64, limit: f64 },

    #[error("kernel size must be odd and positive, got {0}")]
    EvenKernel(usize),

    #[error("pitch must be positive and finite, got {0}")]
    NonPositivePitch(f64),

    #[error("pitch mismatch: image pitch {image} um, expected {expected} um")]
    PitchMismatch { image: f64, expected: f64 },

    #[error("hexagonal grid requires t2 = sqrt(3) t1 (t1 = {t1}, t2 = {t2}); build it as approximate to allow this")]
    NotHexagonal { t1: f64, t2: f64 },

    #[error("sample at ({x}, {y}) um lies outside the image support")]
    OutsideImage { x: f64, y: f64 },

    #[error("scattered points are degenerate (fewer than 3 or all collinear)")]
    DegenerateTriangulation,

    #[error("duplicate scattered point at ({x}, {y})")]
    DuplicatePoint { x: f64, y: f64 },

    #[error("unsupported upsampling factor {0} (expected 2 or 4)")]
    UnsupportedFactor(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("expected {expected} channel(s), got {got}")]
    ChannelCount { expected: usize, got: usize },

    #[error("image too small: {0}")]
    TooSmall(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed container {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image decode error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
