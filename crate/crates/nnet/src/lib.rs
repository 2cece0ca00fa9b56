//! RCAN-lite super-resolution network on a small reverse-mode gradient tape.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tape;
pub mod train;

pub use error::{Error, Result};
pub use model::{Restorer, RestorerConfig};
pub use scalar::Scalar;
pub use tape::{Tape, Tensor, Var};
