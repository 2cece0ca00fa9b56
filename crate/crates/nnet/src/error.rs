use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("network has a distance head but no distance matrix was given")]
    MissingDistance,

    #[error("distance matrix given to a network without a distance head")]
    UnexpectedDistance,

    #[error("invalid network configuration: {0}")]
    Config(String),

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: String },

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("malformed checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] hexsr_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
