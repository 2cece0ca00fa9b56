pub mod error;
pub mod fft;
pub mod image;
pub mod interp;
pub mod io;
pub mod metrics;
pub mod observe;
pub mod optics;
pub mod resample;
pub mod sampling;
pub mod synthetic;
pub mod wiener;

pub use error::{Error, Result};
pub use image::{HexImage, RasterImage};
