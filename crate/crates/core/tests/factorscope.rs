use cxrscreen::archnet::{LayerSpec, PoolMode, Shape};
use cxrscreen::factorscope::{identify_critical_factors, render_overlay, suppress, FactorConfig};
use cxrscreen::{ArchSpec, ImageBuffer, Model};

/// sigmoid(w * max(img) + b)
fn max_model(side: usize, w: f64, b: f64) -> Model {
    let spec = ArchSpec::new(
        "max",
        Shape::new(1, side, side),
        vec![LayerSpec::Pool { mode: PoolMode::Max, kernel: side, stride: side }],
    );
    let mut m = Model::new(spec, 0).unwrap();
    let head = m.head_range();
    m.params_mut()[head.start] = w;
    m.params_mut()[head.start + 1] = b;
    m
}

fn blob_at(side: usize, cell_px: usize, row: usize, col: usize) -> ImageBuffer {
    let mut img = ImageBuffer::filled(side, side, 0.2);
    for y in row * cell_px + 1..row * cell_px + 3 {
        for x in col * cell_px + 1..col * cell_px + 3 {
            img.set(y, x, 1.0);
        }
    }
    img
}

#[test]
fn constant_model_has_no_critical_factors() {
    let m = max_model(16, 0.0, 0.7);
    let img = blob_at(16, 4, 1, 2);
    let mask = identify_critical_factors(&m, &img, &FactorConfig { cells_per_side: 4, ..Default::default() }).unwrap();
    assert!(mask.impact.iter().all(|&v| v == 0.0));
    assert_eq!(mask.count(), 0);
    assert!(!mask.decision_flipped);
}

#[test]
fn blob_cell_has_maximal_impact_and_is_selected() {
    let m = max_model(16, 10.0, -5.0);
    let img = blob_at(16, 4, 2, 1);
    let cfg = FactorConfig { cells_per_side: 4, ..Default::default() };
    let mask = identify_critical_factors(&m, &img, &cfg).unwrap();
    let cell = 2 * 4 + 1;
    for (c, &v) in mask.impact.iter().enumerate() {
        if c != cell {
            assert!(mask.impact[cell] > v);
        }
    }
    assert!(mask.is_critical(2, 1));
    assert!(mask.decision_flipped);
    // suppressing the whole mask lowers the decision score by at least the drop threshold
    let masked = m.predict(&suppress(&img, 4, &mask.selected, img.mean() as f32)).unwrap();
    assert!(masked <= (1.0 - cfg.drop_threshold) * mask.base_probability);
    assert_eq!(mask, identify_critical_factors(&m, &img, &cfg).unwrap());
    for w in mask.cumulative_score.windows(2) {
        assert!(w[1] < w[0]);
    }
    assert!(mask.selected.iter().all(|&c| mask.impact[c] > 0.0));
}

#[test]
fn rejects_bad_arguments() {
    let m = max_model(8, 1.0, 0.0);
    let img = ImageBuffer::filled(8, 8, 0.5);
    assert!(identify_critical_factors(&m, &img, &FactorConfig { cells_per_side: 0, ..Default::default() }).is_err());
    assert!(identify_critical_factors(&m, &img, &FactorConfig { cells_per_side: 9, ..Default::default() }).is_err());
    assert!(identify_critical_factors(&m, &img, &FactorConfig { drop_threshold: 0.0, cells_per_side: 2, ..Default::default() }).is_err());
}

#[test]
fn overlay_png_tints_exactly_the_mask() {
    let m = max_model(16, 10.0, -5.0);
    let img = blob_at(16, 4, 0, 3);
    let mask = identify_critical_factors(&m, &img, &FactorConfig { cells_per_side: 4, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("overlay.png");
    render_overlay(&img, &mask, &path).unwrap();
    let png = image::open(&path).unwrap().to_rgb8();
    assert_eq!(png.dimensions(), (16, 16));
    let tinted = png.pixels().filter(|p| p[0] != p[1]).count();
    assert_eq!(tinted, mask.count() * 16);
    assert!(render_overlay(&img, &mask, &dir.path().join("missing/dir/x.png")).is_err());
}
