//! Image preprocessing and augmentation.
//!
//! The fixed pipeline is: grayscale (channel mean) → crop the top rows →
//! bilinear resize to a square → divide by 255. Augmentation is seeded and
//! resamples all geometric transforms in a single bilinear pass.

mod augment;
mod buffer;
mod io;
mod preprocess;

pub use augment::{augment, augment_rng, intensity_shift, AugmentConfig, AugmentParams};
pub use buffer::ImageBuffer;
pub use io::{load_grayscale, load_preprocessed, read_tensor, write_tensor, TENSOR_MAGIC};
pub use preprocess::{crop_top, hflip, normalize, preprocess, resize, PreprocessConfig, DEFAULT_CROP_FRACTION, DEFAULT_SIDE};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum PixelError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("pixel value {value} at index {index} outside [0, 255]")]
    OutOfRange { index: usize, value: f32 },
    #[error("cannot decode {path}: {msg}")]
    Decode { path: PathBuf, msg: String },
    #[error("bad tensor container: {0}")]
    Container(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
