use super::{ImageBuffer, PixelError};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CROP_FRACTION: f64 = 0.08;
pub const DEFAULT_SIDE: usize = 480;

/// Removes the top `floor(fraction * height)` rows, where burned-in text
/// usually sits.
pub fn crop_top(img: &ImageBuffer, fraction: f64) -> Result<ImageBuffer, PixelError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(PixelError::Argument(format!("crop fraction must be in [0, 1), got {fraction}")));
    }
    let rows = (fraction * img.height() as f64).floor() as usize;
    let w = img.width();
    ImageBuffer::new(img.height() - rows, w, img.pixels()[rows * w..].to_vec())
}

/// Bilinear resize to `side x side` with half-pixel centres and edge clamping.
pub fn resize(img: &ImageBuffer, side: usize) -> Result<ImageBuffer, PixelError> {
    if side == 0 {
        return Err(PixelError::Argument("resize side must be >= 1".into()));
    }
    let (h, w) = (img.height(), img.width());
    let sy = h as f64 / side as f64;
    let sx = w as f64 / side as f64;
    // precompute horizontal taps
    let xs: Vec<(usize, usize, f64)> = (0..side).map(|x| taps(x, sx, w)).collect();
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side {
        let (y0, y1, fy) = taps(y, sy, h);
        for &(x0, x1, fx) in &xs {
            let top = img.get(y0, x0) as f64 * (1.0 - fx) + img.get(y0, x1) as f64 * fx;
            let bot = img.get(y1, x0) as f64 * (1.0 - fx) + img.get(y1, x1) as f64 * fx;
            out.push((top * (1.0 - fy) + bot * fy) as f32);
        }
    }
    ImageBuffer::new(side, side, out)
}

#[inline]
fn taps(dst: usize, scale: f64, len: usize) -> (usize, usize, f64) {
    let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
    let i0 = src.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, src - i0 as f64)
}

/// Maps 8-bit intensities to [0, 1] by division by 255.
pub fn normalize(img: &ImageBuffer) -> Result<ImageBuffer, PixelError> {
    if let Some((index, &value)) = img.pixels().iter().enumerate().find(|(_, v)| !(0.0..=255.0).contains(*v)) {
        return Err(PixelError::OutOfRange { index, value });
    }
    Ok(img.map(|v| v / 255.0))
}

pub fn hflip(img: &ImageBuffer) -> ImageBuffer {
    let w = img.width();
    ImageBuffer::from_fn(img.height(), w, |y, x| img.get(y, w - 1 - x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub crop_fraction: f64,
    pub side: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { crop_fraction: DEFAULT_CROP_FRACTION, side: DEFAULT_SIDE }
    }
}

/// crop → resize → normalize on a grayscale image with 8-bit-range values.
pub fn preprocess(gray: &ImageBuffer, cfg: &PreprocessConfig) -> Result<ImageBuffer, PixelError> {
    let cropped = crop_top(gray, cfg.crop_fraction)?;
    let resized = resize(&cropped, cfg.side)?;
    normalize(&resized)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_examples() {
        let img = ImageBuffer::filled(100, 50, 1.0);
        let c = crop_top(&img, 0.08).unwrap();
        assert_eq!((c.height(), c.width()), (92, 50));
        assert_eq!(crop_top(&img, 0.0).unwrap(), img);
        let tall = ImageBuffer::from_fn(483, 480, |y, _| y as f32);
        let c = crop_top(&tall, 0.08).unwrap();
        assert_eq!((c.height(), c.width()), (445, 480));
        assert_eq!(c.get(0, 0), 38.0);
        assert!(crop_top(&img, 1.0).is_err());
        assert!(crop_top(&img, -0.1).is_err());
    }

    #[test]
    fn resize_constant_and_identity() {
        let c = resize(&ImageBuffer::filled(37, 91, 0.5), 480).unwrap();
        assert_eq!((c.height(), c.width()), (480, 480));
        assert!(c.pixels().iter().all(|&v| v == 0.5));
        let img = ImageBuffer::from_fn(8, 8, |y, x| (y * 8 + x) as f32);
        assert_eq!(resize(&img, 8).unwrap(), img);
    }

    #[test]
    fn normalize_values() {
        let img = ImageBuffer::new(1, 3, vec![0.0, 128.0, 255.0]).unwrap();
        let n = normalize(&img).unwrap();
        assert_eq!(n.pixels(), &[0.0, 128.0 / 255.0, 1.0]);
        assert!(normalize(&ImageBuffer::new(1, 1, vec![256.0]).unwrap()).is_err());
        assert!(normalize(&ImageBuffer::new(1, 1, vec![-1.0]).unwrap()).is_err());
    }

    #[test]
    fn pipeline_shape() {
        let raw = ImageBuffer::from_fn(600, 500, |y, x| ((y * 7 + x * 3) % 256) as f32);
        let out = preprocess(&raw, &PreprocessConfig::default()).unwrap();
        assert_eq!((out.height(), out.width()), (480, 480));
        assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
