use super::{preprocess, ImageBuffer, PixelError, PreprocessConfig};
use image::DynamicImage;
use std::io::{Read, Write};
use std::path::Path;

pub const TENSOR_MAGIC: [u8; 4] = *b"CXRT";
const TENSOR_VERSION: u32 = 1;

/// Decodes a PNG/JPEG into a grayscale buffer with values in [0, 255].
/// Colour inputs are reduced by the plain mean of R, G and B.
pub fn load_grayscale(path: &Path) -> Result<ImageBuffer, PixelError> {
    let decode_err = |msg: String| PixelError::Decode { path: path.to_path_buf(), msg };
    let img = image::open(path).map_err(|e| decode_err(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels: Vec<f32> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(f32::from).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| (p[0] as f32 + p[1] as f32 + p[2] as f32) / 3.0)
            .collect(),
    };
    ImageBuffer::new(h, w, pixels)
}

/// Decode + standard preprocessing.
pub fn load_preprocessed(path: &Path, cfg: &PreprocessConfig) -> Result<ImageBuffer, PixelError> {
    preprocess(&load_grayscale(path)?, cfg)
}

/// Writes `dims` and row-major little-endian `f32` data:
/// `b"CXRT" | u32 version | u32 ndim | u32 dims[ndim] | f32 data[prod(dims)]`.
pub fn write_tensor<W: Write>(mut w: W, dims: &[u32], data: &[f32]) -> Result<(), PixelError> {
    let count: usize = dims.iter().map(|&d| d as usize).product();
    if count != data.len() {
        return Err(PixelError::Container(format!("dims {dims:?} imply {count} values, got {}", data.len())));
    }
    w.write_all(&TENSOR_MAGIC)?;
    w.write_all(&TENSOR_VERSION.to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<(Vec<u32>, Vec<f32>), PixelError> {
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    if word != TENSOR_MAGIC {
        return Err(PixelError::Container("bad magic".into()));
    }
    let mut u32_le = |r: &mut R| -> Result<u32, PixelError> {
        r.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let version = u32_le(&mut r)?;
    if version != TENSOR_VERSION {
        return Err(PixelError::Container(format!("unsupported version {version}")));
    }
    let ndim = u32_le(&mut r)?;
    if ndim > 8 {
        return Err(PixelError::Container(format!("implausible rank {ndim}")));
    }
    let dims = (0..ndim).map(|_| u32_le(&mut r)).collect::<Result<Vec<_>, _>>()?;
    let count: usize = dims.iter().map(|&d| d as usize).product();
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok((dims, data))
}

impl ImageBuffer {
    pub fn write_tensor<W: Write>(&self, w: W) -> Result<(), PixelError> {
        write_tensor(w, &[1, self.height() as u32, self.width() as u32], self.pixels())
    }

    pub fn read_tensor<R: Read>(r: R) -> Result<Self, PixelError> {
        let (dims, data) = read_tensor(r)?;
        match dims.as_slice() {
            [1, h, w] => ImageBuffer::new(*h as usize, *w as usize, data),
            other => Err(PixelError::Container(format!("expected 1xHxW, got {other:?}"))),
        }
    }
}
