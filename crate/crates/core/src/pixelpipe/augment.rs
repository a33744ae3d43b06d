use super::{hflip, ImageBuffer, PixelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Augmentation ranges. Every range is symmetric around zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Fraction of width / height.
    pub translate_frac: f64,
    pub rotate_deg: f64,
    pub hflip: bool,
    pub zoom_frac: f64,
    /// Additive, in normalized intensity units.
    pub intensity_frac: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            translate_frac: 0.10,
            rotate_deg: 10.0,
            hflip: true,
            zoom_frac: 0.15,
            intensity_frac: 0.10,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// No-op configuration.
    pub fn disabled() -> Self {
        AugmentConfig { translate_frac: 0.0, rotate_deg: 0.0, hflip: false, zoom_frac: 0.0, intensity_frac: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), PixelError> {
        for (name, v) in [
            ("translate_frac", self.translate_frac),
            ("zoom_frac", self.zoom_frac),
            ("intensity_frac", self.intensity_frac),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(PixelError::Argument(format!("{name} must be in [0, 1), got {v}")));
            }
        }
        if !(0.0..180.0).contains(&self.rotate_deg) {
            return Err(PixelError::Argument(format!("rotate_deg must be in [0, 180), got {}", self.rotate_deg)));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == AugmentConfig { seed: self.seed, ..AugmentConfig::disabled() }
    }

    /// Draws one set of transform parameters. Draw order is fixed
    /// (tx, ty, angle, flip, zoom, shift) and every draw is consumed even when
    /// its range is zero, so the stream stays aligned across configurations.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentParams {
        let mut sym = |r: f64| (rng.random::<f64>() * 2.0 - 1.0) * r;
        let tx = sym(self.translate_frac);
        let ty = sym(self.translate_frac);
        let angle = sym(self.rotate_deg);
        let flip_draw = rng.random::<bool>();
        let zoom = rng.random::<f64>() * 2.0 - 1.0;
        let shift = rng.random::<f64>() * 2.0 - 1.0;
        AugmentParams {
            translate_x: tx,
            translate_y: ty,
            rotate_deg: angle,
            flip: self.hflip && flip_draw,
            zoom: 1.0 + zoom * self.zoom_frac,
            intensity_shift: shift * self.intensity_frac,
        }
    }
}

/// One concrete draw of augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// Fraction of width.
    pub translate_x: f64,
    /// Fraction of height.
    pub translate_y: f64,
    pub rotate_deg: f64,
    pub flip: bool,
    /// Scale factor; > 1 zooms in.
    pub zoom: f64,
    pub intensity_shift: f64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams { translate_x: 0.0, translate_y: 0.0, rotate_deg: 0.0, flip: false, zoom: 1.0, intensity_shift: 0.0 }
    }

    fn geometric_identity(&self) -> bool {
        self.translate_x == 0.0 && self.translate_y == 0.0 && self.rotate_deg == 0.0 && self.zoom == 1.0
    }

    /// Applies translate → rotate → flip → zoom as one inverse-mapped
    /// bilinear resample (zero fill outside the source), then the clamped
    /// intensity shift.
    pub fn apply(&self, img: &ImageBuffer) -> ImageBuffer {
        let geo = if self.geometric_identity() {
            if self.flip {
                hflip(img)
            } else {
                img.clone()
            }
        } else {
            self.resample(img)
        };
        intensity_shift(&geo, self.intensity_shift)
    }

    fn resample(&self, img: &ImageBuffer) -> ImageBuffer {
        let (h, w) = (img.height(), img.width());
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let tx = self.translate_x * w as f64;
        let ty = self.translate_y * h as f64;
        let (sin, cos) = self.rotate_deg.to_radians().sin_cos();
        let flip = if self.flip { -1.0 } else { 1.0 };
        ImageBuffer::from_fn(h, w, |y, x| {
            // undo zoom, flip, rotation, translation in that order
            let u = (x as f64 - cx) / self.zoom * flip;
            let v = (y as f64 - cy) / self.zoom;
            let ru = cos * u + sin * v;
            let rv = -sin * u + cos * v;
            sample_zero_fill(img, rv - ty + cy, ru - tx + cx)
        })
    }
}

fn sample_zero_fill(img: &ImageBuffer, sy: f64, sx: f64) -> f32 {
    let (h, w) = (img.height() as isize, img.width() as isize);
    let y0 = sy.floor();
    let x0 = sx.floor();
    let fy = sy - y0;
    let fx = sx - x0;
    let (y0, x0) = (y0 as isize, x0 as isize);
    let px = |y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h || x >= w {
            0.0
        } else {
            img.get(y as usize, x as usize) as f64
        }
    };
    let top = px(y0, x0) * (1.0 - fx) + px(y0, x0 + 1) * fx;
    let bot = px(y0 + 1, x0) * (1.0 - fx) + px(y0 + 1, x0 + 1) * fx;
    (top * (1.0 - fy) + bot * fy) as f32
}

/// Adds `shift` to every pixel and clamps to [0, 1].
pub fn intensity_shift(img: &ImageBuffer, shift: f64) -> ImageBuffer {
    if shift == 0.0 {
        return img.clone();
    }
    img.map(|v| (v as f64 + shift).clamp(0.0, 1.0) as f32)
}

/// Random state for image `index` under a global seed.
pub fn augment_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws parameters from `rng` and applies them.
pub fn augment<R: Rng + ?Sized>(img: &ImageBuffer, cfg: &AugmentConfig, rng: &mut R) -> ImageBuffer {
    cfg.draw(rng).apply(img)
}
