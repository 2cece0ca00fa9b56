use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("missing image file for id {id} in {dir}")]
    MissingFile { id: u32, dir: PathBuf },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} image(s) failed")]
    Partial { failed: usize, total: usize },

    #[error(transparent)]
    Core(#[from] hexsr_core::Error),

    #[error(transparent)]
    Net(#[from] hexsr_nnet::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 configuration, 2 partial per-image failure,
    /// 3 input/output.
    pub fn exit_code(&self) -> i32 {
        use hexsr_core::Error as C;
        use hexsr_nnet::Error as N;
        match self {
            Error::Config(_) => 1,
            Error::Partial { .. } => 2,
            Error::Dataset(_) | Error::MissingFile { .. } | Error::Io { .. } => 3,
            Error::Core(C::Io { .. } | C::Format { .. } | C::Image { .. }) => 3,
            Error::Net(N::Io { .. } | N::Checkpoint { .. }) => 3,
            Error::Net(N::Core(C::Io { .. } | C::Format { .. } | C::Image { .. })) => 3,
            Error::Core(_) | Error::Net(_) => 1,
        }
    }
}
