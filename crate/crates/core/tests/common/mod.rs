//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the code it checks.
#![allow(dead_code)]

use cxrscreen::archnet::{Activation, ArchSpec, LayerSpec, PoolMode, PrpeBlockSpec, Replication, Shape};
use cxrscreen::dataman::{DatasetManifest, Finding, ImageRecord, Sex, Source, Split, View};
use cxrscreen::ImageBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- resize

/// Bilinear sample with half-pixel centres, written per axis.
pub fn bilinear_oracle(src: &[Vec<f64>], out_h: usize, out_w: usize) -> Vec<Vec<f64>> {
    let in_h = src.len();
    let in_w = src[0].len();
    let coord = |o: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let mut c = (o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5;
        if c < 0.0 {
            c = 0.0;
        }
        if c > (n_in - 1) as f64 {
            c = (n_in - 1) as f64;
        }
        let lo = c.floor() as usize;
        let hi = if lo + 1 < n_in { lo + 1 } else { lo };
        (lo, hi, c - lo as f64)
    };
    let mut out = vec![vec![0.0; out_w]; out_h];
    for (y, row) in out.iter_mut().enumerate() {
        let (y0, y1, fy) = coord(y, in_h, out_h);
        for (x, v) in row.iter_mut().enumerate() {
            let (x0, x1, fx) = coord(x, in_w, out_w);
            let top = src[y0][x0] + fx * (src[y0][x1] - src[y0][x0]);
            let bottom = src[y1][x0] + fx * (src[y1][x1] - src[y1][x0]);
            *v = top + fy * (bottom - top);
        }
    }
    out
}

pub fn to_rows(img: &ImageBuffer) -> Vec<Vec<f64>> {
    (0..img.height()).map(|y| (0..img.width()).map(|x| img.get(y, x) as f64).collect()).collect()
}

// ---------------------------------------------------------------- complexity

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Tally {
    pub params: u64,
    pub macs: u64,
}

fn ceil_div(a: usize, b: usize) -> usize {
    (a + b - 1) / b
}

/// Walks a convolution the way an executor would, bumping a counter for
/// every weight and every multiply, padded taps included.
fn conv_tally(t: &mut Tally, cin: usize, cout: usize, k: usize, stride: usize, groups: usize, h: usize, w: usize) -> (usize, usize) {
    let oh = ceil_div(h, stride);
    let ow = ceil_div(w, stride);
    let cin_g = cin / groups;
    let cout_g = cout / groups;
    for _g in 0..groups {
        for _oc in 0..cout_g {
            for _ic in 0..cin_g {
                for _ky in 0..k {
                    for _kx in 0..k {
                        t.params += 1;
                    }
                }
            }
            t.params += 1; // bias
        }
    }
    for _g in 0..groups {
        for _oc in 0..cout_g {
            for _y in 0..oh {
                for _x in 0..ow {
                    for _ic in 0..cin_g {
                        for _ky in 0..k {
                            for _kx in 0..k {
                                t.macs += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    (oh, ow)
}

fn dense_tally(t: &mut Tally, nin: usize, nout: usize) {
    for _o in 0..nout {
        for _i in 0..nin {
            t.params += 1;
            t.macs += 1;
        }
        t.params += 1;
    }
}

/// Brute-force parameter and MAC count, head included.
pub fn brute_force_tally(spec: &ArchSpec) -> Tally {
    let mut t = Tally::default();
    let (mut c, mut h, mut w) = (spec.input.channels, spec.input.height, spec.input.width);
    let mut outs = Vec::new();
    for layer in &spec.layers {
        match *layer {
            LayerSpec::ConvStandard { in_channels, out_channels, kernel, stride } => {
                (h, w) = conv_tally(&mut t, in_channels, out_channels, kernel, stride, 1, h, w);
                c = out_channels;
            }
            LayerSpec::ConvPointwise { in_channels, out_channels, stride } => {
                (h, w) = conv_tally(&mut t, in_channels, out_channels, 1, stride, 1, h, w);
                c = out_channels;
            }
            LayerSpec::ConvDepthwise { channels, multiplier, kernel, stride } => {
                (h, w) = conv_tally(&mut t, channels, channels * multiplier, kernel, stride, channels, h, w);
                c = channels * multiplier;
            }
            LayerSpec::PrpeBlock(b) => {
                let mut internal = (b.in_channels as f64 * b.project_ratio).round() as usize;
                if internal == 0 {
                    internal = 1;
                }
                conv_tally(&mut t, b.in_channels, internal, 1, 1, 1, h, w);
                for _ in 0..b.replicas {
                    conv_tally(&mut t, internal, internal, b.kernel, 1, internal, h, w);
                }
                let merged = if b.replication == Replication::Concat { internal * b.replicas } else { internal };
                conv_tally(&mut t, merged, internal, 1, 1, 1, h, w);
                conv_tally(&mut t, internal, b.expand_channels, 1, 1, 1, h, w);
                c = b.expand_channels;
            }
            LayerSpec::Pool { stride, .. } => {
                h = ceil_div(h, stride);
                w = ceil_div(w, stride);
            }
            LayerSpec::GlobalPool => {
                h = 1;
                w = 1;
            }
            LayerSpec::Dense { in_features, out_features } => {
                dense_tally(&mut t, in_features, out_features);
                c = out_features;
                h = 1;
                w = 1;
            }
            LayerSpec::Activation { .. } => {}
        }
        outs.push((c, h, w));
    }
    for &(from, to) in &spec.long_range_edges {
        let (cf, _, _) = outs[from];
        let (ct, ht, wt) = outs[to];
        if cf != ct {
            conv_tally(&mut t, cf, ct, 1, 1, 1, ht, wt);
        }
    }
    dense_tally(&mut t, c * h * w, 1);
    t
}

/// Random valid spec over small inputs, exercising every layer kind.
pub fn random_spec(r: &mut ChaCha8Rng) -> ArchSpec {
    loop {
        let input = Shape::new(r.random_range(1..=3), r.random_range(4..=18), r.random_range(4..=18));
        let mut shape = input;
        let mut layers = Vec::new();
        let n = r.random_range(1..=7);
        for _ in 0..n {
            let c = shape.channels;
            let layer = match r.random_range(0..9) {
                0 => LayerSpec::ConvStandard {
                    in_channels: c,
                    out_channels: r.random_range(1..=6),
                    kernel: [1, 3, 5][r.random_range(0..3)],
                    stride: r.random_range(1..=2),
                },
                1 => LayerSpec::ConvPointwise { in_channels: c, out_channels: r.random_range(1..=6), stride: r.random_range(1..=2) },
                2 => LayerSpec::ConvDepthwise {
                    channels: c,
                    multiplier: r.random_range(1..=2),
                    kernel: [1, 3, 5][r.random_range(0..3)],
                    stride: r.random_range(1..=2),
                },
                3 | 4 => {
                    let ratio = [0.25, 0.5, 0.75, 1.0][r.random_range(0..4)];
                    let mut b = PrpeBlockSpec::new(c, ratio, r.random_range(1..=3), 0);
                    b.expand_channels = b.internal_channels() + r.random_range(0..4);
                    b.kernel = [1, 3, 5][r.random_range(0..3)];
                    if r.random_bool(0.3) {
                        b.replication = Replication::Concat;
                    }
                    LayerSpec::PrpeBlock(b)
                }
                5 => LayerSpec::Pool {
                    mode: if r.random_bool(0.5) { PoolMode::Max } else { PoolMode::Avg },
                    kernel: r.random_range(1..=3),
                    stride: r.random_range(1..=2),
                },
                6 => LayerSpec::Activation { function: Activation::Relu },
                7 if shape.numel() <= 64 => LayerSpec::Dense { in_features: shape.numel(), out_features: r.random_range(1..=5) },
                _ => LayerSpec::GlobalPool,
            };
            shape = layer.output_shape(shape).expect("generated layer is valid");
            layers.push(layer);
        }
        let spec = ArchSpec::new("random", input, layers);
        let plan = spec.shape_plan().expect("chain is valid");
        let mut edges = Vec::new();
        for to in 2..plan.outputs.len() {
            for from in 0..to - 1 {
                if plan.outputs[from].spatial() == plan.outputs[to].spatial() && r.random_bool(0.25) {
                    edges.push((from, to));
                }
            }
        }
        let spec = spec.with_edges(edges);
        if spec.validate().is_ok() {
            return spec;
        }
    }
}

// ---------------------------------------------------------------- PRPE

/// Dense reference convolution over `[c][h][w]` arrays, stride 1, same
/// padding, weights `[out][in/groups][k][k]` then biases.
pub fn ref_conv(x: &[Vec<Vec<f64>>], cout: usize, k: usize, groups: usize, p: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let cin = x.len();
    let (h, w) = (x[0].len(), x[0][0].len());
    let cin_g = cin / groups;
    let cout_g = cout / groups;
    let pad = (k - 1) / 2;
    let nw = cout * cin_g * k * k;
    let mut y = vec![vec![vec![0.0; w]; h]; cout];
    for oc in 0..cout {
        let g = oc / cout_g;
        for oy in 0..h {
            for ox in 0..w {
                let mut s = p[nw + oc];
                for icg in 0..cin_g {
                    let ic = g * cin_g + icg;
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = oy as isize + ky as isize - pad as isize;
                            let ix = ox as isize + kx as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            s += p[((oc * cin_g + icg) * k + ky) * k + kx] * x[ic][iy as usize][ix as usize];
                        }
                    }
                }
                y[oc][oy][ox] = s;
            }
        }
    }
    y
}

pub fn relu3(x: &mut [Vec<Vec<f64>>]) {
    for v in x.iter_mut().flatten().flatten() {
        *v = v.max(0.0);
    }
}

// ---------------------------------------------------------------- images

/// 32×32 fixture: flat background in [0.2, 0.4] with slight noise;
/// positives carry a 5×5 block at 1.0.
pub fn blob_image(r: &mut ChaCha8Rng, positive: bool) -> ImageBuffer {
    let bg: f32 = r.random_range(0.2..0.4);
    let mut img = ImageBuffer::from_fn(32, 32, |_, _| bg + r.random_range(-0.02..0.02));
    if positive {
        let cy = r.random_range(3..29);
        let cx = r.random_range(3..29);
        for y in cy - 2..=cy + 2 {
            for x in cx - 2..=cx + 2 {
                img.set(y, x, 1.0);
            }
        }
    }
    img
}

/// Closed-form classifier for the blob fixture.
pub fn threshold_oracle(img: &ImageBuffer) -> bool {
    img.pixels().iter().cloned().fold(f32::MIN, f32::max) > 0.7
}

/// `n_train` alternating positive/negative train images plus `n_val`
/// validation images, one patient each.
pub fn blob_dataset(seed: u64, n_train: usize, n_val: usize) -> (DatasetManifest, HashMap<String, ImageBuffer>) {
    let mut r = rng(seed);
    let mut recs = Vec::new();
    let mut images = HashMap::new();
    let mut split = BTreeMap::new();
    for i in 0..n_train + n_val {
        let pos = i % 2 == 0;
        let id = format!("img{i:03}");
        let finding = if pos { Finding::Sars2 } else { Finding::None };
        let mut rec = ImageRecord::new(id.clone(), format!("pt{i:03}"), Source::Other("synthetic".into()), finding);
        rec.file_path = format!("{id}.cxrt");
        recs.push(rec);
        images.insert(id.clone(), blob_image(&mut r, pos));
        split.insert(id, if i < n_train { Split::Train } else { Split::Val });
    }
    let mut m = DatasetManifest::from_records(recs);
    m.split_assignment = split;
    (m, images)
}

// ---------------------------------------------------------------- manifests

pub fn random_manifest(r: &mut ChaCha8Rng, patients: usize) -> DatasetManifest {
    let mut recs = Vec::new();
    for p in 0..patients {
        let imgs = r.random_range(1..=3);
        let base = Finding::ALL[r.random_range(0..3)];
        let age = if r.random_bool(0.9) { Some(r.random_range(0..100)) } else { None };
        let sex = [Sex::Male, Sex::Female, Sex::Unknown][r.random_range(0..3)];
        for i in 0..imgs {
            // a few patients carry images with different findings
            let finding = if i > 0 && r.random_bool(0.05) { Finding::ALL[r.random_range(0..3)] } else { base };
            let mut rec = ImageRecord::new(format!("p{p}-i{i}"), format!("p{p}"), Source::Cohen, finding);
            rec.age = age;
            rec.sex = sex;
            rec.view = [View::PA, View::AP, View::Unknown][r.random_range(0..3)];
            recs.push(rec);
        }
    }
    DatasetManifest::from_records(recs)
}

/// Whether some subset of `counts` sums to `target`.
pub fn subset_sum(counts: &[usize], target: usize) -> bool {
    let mut reach = vec![false; target + 1];
    reach[0] = true;
    for &c in counts {
        for s in (c..=target).rev() {
            reach[s] |= reach[s - c];
        }
    }
    reach[target]
}
