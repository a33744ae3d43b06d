//! Browser bindings: preprocessing preview, a critical-factor demo and the
//! sensitivity / PPV gate.

use cxrscreen::archnet::{LayerSpec, PoolMode, Shape};
use cxrscreen::factorscope::{identify_critical_factors, overlay_rgb, FactorConfig};
use cxrscreen::metrics::{metrics_with_threshold, ConfusionMatrix};
use cxrscreen::pixelpipe::{augment, augment_rng, preprocess, AugmentConfig, PreprocessConfig, DEFAULT_CROP_FRACTION};
use cxrscreen::trainer::{check_constraints, ConstraintSpec};
use cxrscreen::{ArchSpec, ImageBuffer, Model};
use serde_json::json;
use wasm_bindgen::prelude::*;

pub const DEMO_SIDE: usize = 48;
const DETECTOR_WEIGHT: f64 = 12.0;
const DETECTOR_BIAS: f64 = -8.0;

/// Min-max stretch to 0..=255 for display.
pub fn to_display(img: &ImageBuffer) -> Vec<u8> {
    let px = img.pixels();
    let lo = px.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = px.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    px.iter().map(|&v| (((v - lo) / span) * 255.0).round() as u8).collect()
}

/// Preprocesses an 8-bit grayscale image to `side`², then draws one seeded
/// augmentation of it. Returns both images, preprocessed first, as
/// `2 * side * side` display bytes.
#[wasm_bindgen]
pub fn preview(gray: &[u8], width: usize, height: usize, side: usize, seed: u64) -> Result<Vec<u8>, JsError> {
    if gray.len() != width * height {
        return Err(JsError::new(&format!("expected {} pixels, got {}", width * height, gray.len())));
    }
    let raw = ImageBuffer::new(height, width, gray.iter().map(|&v| f32::from(v)).collect())
        .map_err(|e| JsError::new(&e.to_string()))?;
    let cfg = PreprocessConfig { crop_fraction: DEFAULT_CROP_FRACTION, side };
    let pre = preprocess(&raw, &cfg).map_err(|e| JsError::new(&e.to_string()))?;
    let aug = augment(&pre, &AugmentConfig::default(), &mut augment_rng(seed, 0));
    let mut out = to_display(&pre);
    out.extend(to_display(&aug));
    Ok(out)
}

/// A model that reports how bright the brightest pixel is.
pub fn bright_spot_detector() -> Model {
    let spec = ArchSpec::new(
        "bright-spot",
        Shape::new(1, DEMO_SIDE, DEMO_SIDE),
        vec![LayerSpec::Pool { mode: PoolMode::Max, kernel: DEMO_SIDE, stride: DEMO_SIDE }],
    );
    let mut m = Model::new(spec, 0).expect("detector spec is valid");
    let head = m.head_range();
    m.params_mut()[head.start] = DETECTOR_WEIGHT;
    m.params_mut()[head.start + 1] = DETECTOR_BIAS;
    m
}

/// Textured background with a bright 4x4 spot centred at `(y, x)`.
pub fn demo_image(y: usize, x: usize) -> ImageBuffer {
    ImageBuffer::from_fn(DEMO_SIDE, DEMO_SIDE, |r, c| {
        let in_spot = r + 2 >= y && r < y + 2 && c + 2 >= x && c < x + 2;
        if in_spot {
            1.0
        } else {
            0.3 + 0.05 * (((r * 7 + c * 3) % 5) as f32 / 4.0)
        }
    })
}

#[wasm_bindgen]
pub struct Explanation {
    json: String,
    rgb: Vec<u8>,
}

#[wasm_bindgen]
impl Explanation {
    /// Mask, impacts and probabilities as JSON.
    pub fn json(&self) -> String {
        self.json.clone()
    }

    /// `DEMO_SIDE² * 3` bytes of overlay RGB.
    pub fn rgb(&self) -> Vec<u8> {
        self.rgb.clone()
    }

    pub fn side(&self) -> usize {
        DEMO_SIDE
    }
}

/// Runs the critical-factor search on the demo image with the spot at `(y, x)`.
#[wasm_bindgen]
pub fn explain(y: usize, x: usize, cells: usize, drop_threshold: f64) -> Result<Explanation, JsError> {
    let img = demo_image(y.min(DEMO_SIDE - 1), x.min(DEMO_SIDE - 1));
    let cfg = FactorConfig { cells_per_side: cells, drop_threshold, class_threshold: 0.5 };
    let mask = identify_critical_factors(&bright_spot_detector(), &img, &cfg).map_err(|e| JsError::new(&e.to_string()))?;
    let rgb = overlay_rgb(&img, &mask).map_err(|e| JsError::new(&e.to_string()))?;
    let json = serde_json::to_string(&mask).map_err(|e| JsError::new(&e.to_string()))?;
    Ok(Explanation { json, rgb })
}

/// Scores a confusion matrix against the operating-point constraints.
#[wasm_bindgen]
pub fn gate(tn: u32, fp: u32, fn_: u32, tp: u32, min_sensitivity: f64, min_ppv: f64) -> Result<String, JsError> {
    let spec = ConstraintSpec { min_sensitivity, min_ppv };
    spec.validate().map_err(|e| JsError::new(&e))?;
    let metrics = metrics_with_threshold(ConfusionMatrix::new(tn.into(), fp.into(), fn_.into(), tp.into()), 0.5);
    let verdict = check_constraints(&metrics, &spec);
    Ok(json!({
        "summary": metrics.summary_line(),
        "sensitivity": metrics.sensitivity,
        "ppv": metrics.ppv,
        "accuracy": metrics.accuracy,
        "passed": verdict.passed,
        "verdict": verdict.to_string(),
    })
    .to_string())
}
