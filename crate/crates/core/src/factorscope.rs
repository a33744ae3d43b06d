//! Occlusion-based critical-factor search.
//!
//! The image is cut into a square grid. Each cell is suppressed in turn by
//! filling it with the image mean, and the drop of the decision score (the
//! probability of the predicted class) is recorded as that cell's impact.
//! Cells with positive impact are then added greedily, highest impact first,
//! until the decision flips or the score falls to `(1 - drop) * original`.

use crate::archnet::{Model, ModelError};
use crate::pixelpipe::ImageBuffer;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_CELLS: usize = 12;
pub const DEFAULT_DROP: f64 = 0.5;
pub const OVERLAY_ALPHA: f32 = 0.45;

#[derive(Debug, thiserror::Error)]
pub enum ExplainError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite model output")]
    NonFinite,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot write {path}: {msg}")]
    Write { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorConfig {
    pub cells_per_side: usize,
    /// Relative drop of the decision score that ends the search.
    pub drop_threshold: f64,
    pub class_threshold: f64,
}

impl Default for FactorConfig {
    fn default() -> Self {
        FactorConfig { cells_per_side: DEFAULT_CELLS, drop_threshold: DEFAULT_DROP, class_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalFactorMask {
    pub cells_per_side: usize,
    pub height: usize,
    pub width: usize,
    /// Row-major, `cells_per_side²` entries.
    pub grid: Vec<bool>,
    pub impact: Vec<f64>,
    /// Cells in the order they were accepted.
    pub selected: Vec<usize>,
    /// Decision score after each accepted cell.
    pub cumulative_score: Vec<f64>,
    pub base_probability: f64,
    pub masked_probability: f64,
    pub predicted_positive: bool,
    pub decision_flipped: bool,
    pub target_reached: bool,
}

impl CriticalFactorMask {
    pub fn is_critical(&self, row: usize, col: usize) -> bool {
        self.grid[row * self.cells_per_side + col]
    }

    pub fn count(&self) -> usize {
        self.grid.iter().filter(|&&b| b).count()
    }

    pub fn cell_bounds(&self, cell: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        cell_bounds(self.height, self.width, self.cells_per_side, cell)
    }

    /// One line per critical cell: `row col impact`, then a summary line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# row col impact\n");
        for &c in &self.selected {
            let (r, k) = (c / self.cells_per_side, c % self.cells_per_side);
            s.push_str(&format!("{r} {k} {:.6}\n", self.impact[c]));
        }
        s.push_str(&format!(
            "# cells={} base_p={:.6} masked_p={:.6} flipped={} target_reached={}\n",
            self.count(),
            self.base_probability,
            self.masked_probability,
            self.decision_flipped,
            self.target_reached
        ));
        s
    }
}

/// Row and column pixel ranges of grid cell `cell`.
pub fn cell_bounds(height: usize, width: usize, n: usize, cell: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let (r, c) = (cell / n, cell % n);
    (r * height / n..(r + 1) * height / n, c * width / n..(c + 1) * width / n)
}

/// Copy of `img` with the given cells filled with `fill`.
pub fn suppress(img: &ImageBuffer, n: usize, cells: &[usize], fill: f32) -> ImageBuffer {
    let mut out = img.clone();
    let w = img.width();
    for &cell in cells {
        let (rows, cols) = cell_bounds(img.height(), w, n, cell);
        for y in rows {
            out.pixels_mut()[y * w + cols.start..y * w + cols.end].fill(fill);
        }
    }
    out
}

pub fn identify_critical_factors(
    model: &Model,
    img: &ImageBuffer,
    cfg: &FactorConfig,
) -> Result<CriticalFactorMask, ExplainError> {
    let n = cfg.cells_per_side;
    if n == 0 || n > img.height() || n > img.width() {
        return Err(ExplainError::Argument(format!(
            "cells per side must be in 1..={}, got {n}",
            img.height().min(img.width())
        )));
    }
    if !(cfg.drop_threshold > 0.0 && cfg.drop_threshold <= 1.0) {
        return Err(ExplainError::Argument(format!("drop threshold must be in (0, 1], got {}", cfg.drop_threshold)));
    }
    let t = cfg.class_threshold;
    let prob = |x: &ImageBuffer| -> Result<f64, ExplainError> {
        let p = model.predict(x)?;
        if p.is_finite() {
            Ok(p)
        } else {
            Err(ExplainError::NonFinite)
        }
    };
    let p0 = prob(img)?;
    let positive = p0 >= t;
    let score = |p: f64| if positive { p } else { 1.0 - p };
    let d0 = score(p0);
    let fill = img.mean() as f32;

    let cells: Vec<usize> = (0..n * n).collect();
    let single = |c: &usize| prob(&suppress(img, n, &[*c], fill));
    #[cfg(feature = "parallel")]
    let probs: Vec<Result<f64, ExplainError>> = {
        use rayon::prelude::*;
        cells.par_iter().map(single).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let probs: Vec<Result<f64, ExplainError>> = cells.iter().map(single).collect();
    let impact: Vec<f64> = probs.into_iter().map(|p| p.map(|p| d0 - score(p))).collect::<Result<_, _>>()?;

    let mut ranked: Vec<usize> = cells.into_iter().filter(|&c| impact[c] > 0.0).collect();
    ranked.sort_by(|&a, &b| impact[b].total_cmp(&impact[a]).then(a.cmp(&b)));

    let target = (1.0 - cfg.drop_threshold) * d0;
    let mut selected = Vec::new();
    let mut cumulative = Vec::new();
    let mut cur = d0;
    let mut cur_p = p0;
    let mut flipped = false;
    let mut reached = false;
    for c in ranked {
        selected.push(c);
        let p = prob(&suppress(img, n, &selected, fill))?;
        let d = score(p);
        if d >= cur {
            selected.pop();
            continue;
        }
        cur = d;
        cur_p = p;
        cumulative.push(d);
        flipped = (p >= t) != positive;
        reached = d <= target;
        if flipped || reached {
            break;
        }
    }
    let mut grid = vec![false; n * n];
    for &c in &selected {
        grid[c] = true;
    }
    Ok(CriticalFactorMask {
        cells_per_side: n,
        height: img.height(),
        width: img.width(),
        grid,
        impact,
        selected,
        cumulative_score: cumulative,
        base_probability: p0,
        masked_probability: cur_p,
        predicted_positive: positive,
        decision_flipped: flipped,
        target_reached: reached || flipped,
    })
}

/// RGB8 raster of `img` with critical cells blended towards red.
pub fn overlay_rgb(img: &ImageBuffer, mask: &CriticalFactorMask) -> Result<Vec<u8>, ExplainError> {
    if mask.height != img.height() || mask.width != img.width() {
        return Err(ExplainError::Argument(format!(
            "mask is for {}x{}, image is {}x{}",
            mask.height,
            mask.width,
            img.height(),
            img.width()
        )));
    }
    let w = img.width();
    let mut tinted = vec![false; img.height() * w];
    for &c in &mask.selected {
        let (rows, cols) = mask.cell_bounds(c);
        for y in rows {
            tinted[y * w + cols.start..y * w + cols.end].fill(true);
        }
    }
    let mut out = Vec::with_capacity(tinted.len() * 3);
    for (i, &v) in img.pixels().iter().enumerate() {
        let g = v.clamp(0.0, 1.0) * 255.0;
        if tinted[i] {
            let mix = |target: f32| ((1.0 - OVERLAY_ALPHA) * g + OVERLAY_ALPHA * target).round() as u8;
            out.extend_from_slice(&[mix(255.0), mix(0.0), mix(0.0)]);
        } else {
            let g = g.round() as u8;
            out.extend_from_slice(&[g, g, g]);
        }
    }
    Ok(out)
}

/// Writes the overlay as PNG.
pub fn render_overlay(img: &ImageBuffer, mask: &CriticalFactorMask, out: &Path) -> Result<(), ExplainError> {
    let rgb = overlay_rgb(img, mask)?;
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, rgb)
        .ok_or_else(|| ExplainError::Argument("raster size mismatch".into()))?;
    buf.save_with_format(out, image::ImageFormat::Png)
        .map_err(|e| ExplainError::Write { path: out.display().to_string(), msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_with(cells: &[usize], n: usize, h: usize, w: usize) -> CriticalFactorMask {
        let mut grid = vec![false; n * n];
        for &c in cells {
            grid[c] = true;
        }
        CriticalFactorMask {
            cells_per_side: n,
            height: h,
            width: w,
            grid,
            impact: vec![0.0; n * n],
            selected: cells.to_vec(),
            cumulative_score: vec![],
            base_probability: 0.5,
            masked_probability: 0.5,
            predicted_positive: true,
            decision_flipped: false,
            target_reached: false,
        }
    }

    #[test]
    fn bounds_tile_image() {
        let mut seen = vec![0; 13 * 17];
        for c in 0..16 {
            let (rows, cols) = cell_bounds(13, 17, 4, c);
            for y in rows {
                for x in cols.clone() {
                    seen[y * 17 + x] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn overlay_counts() {
        let img = ImageBuffer::filled(24, 24, 0.5);
        let tinted = |m: &CriticalFactorMask| {
            overlay_rgb(&img, m).unwrap().chunks(3).filter(|p| p[0] != p[1]).count()
        };
        assert_eq!(tinted(&mask_with(&[], 3, 24, 24)), 0);
        assert_eq!(tinted(&mask_with(&[4], 3, 24, 24)), 64);
        assert_eq!(tinted(&mask_with(&(0..9).collect::<Vec<_>>(), 3, 24, 24)), 576);
    }

    #[test]
    fn text_lists_cells() {
        let m = mask_with(&[5], 3, 9, 9);
        let t = m.to_text();
        assert!(t.contains("\n1 2 0.000000\n"));
    }
}
