pub mod bench;
pub mod error;
pub mod fft;
pub mod image;
pub mod loss;
pub mod metrics;
pub mod numeric;
pub mod pli;
pub mod raster;
pub mod registration;

pub use error::{Error, Result};
pub use image::{BinaryMask, ImageBuffer};
