//! Scalar reference kernels (f64) with hand-written backward passes.

use super::spec::{Activation, PoolMode, Shape};

/// Dense `c x h x w` activations, row-major per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(shape: Shape) -> Self {
        FeatureMap { shape, data: vec![0.0; shape.numel()] }
    }

    pub fn new(shape: Shape, data: Vec<f64>) -> Self {
        assert_eq!(shape.numel(), data.len(), "feature map data does not match shape {shape}");
        FeatureMap { shape, data }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.shape.height + y) * self.shape.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let hw = self.shape.height * self.shape.width;
        &self.data[c * hw..(c + 1) * hw]
    }

    pub fn add_assign(&mut self, other: &FeatureMap) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Convolution geometry with "same" padding: `out = ceil(in / stride)`,
/// total padding `max((out - 1) * stride + kernel - in, 0)` split with the
/// smaller half on top / left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub groups: usize,
}

impl ConvGeom {
    pub fn weight_len(&self) -> usize {
        self.out_channels * (self.in_channels / self.groups) * self.kernel * self.kernel
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_channels
    }

    pub fn fan_in(&self) -> usize {
        (self.in_channels / self.groups) * self.kernel * self.kernel
    }

    pub fn output_shape(&self, input: Shape) -> Shape {
        Shape::new(self.out_channels, input.height.div_ceil(self.stride), input.width.div_ceil(self.stride))
    }
}

#[inline]
fn pad_before(input: usize, output: usize, kernel: usize, stride: usize) -> usize {
    ((output - 1) * stride + kernel).saturating_sub(input) / 2
}

/// Grouped 2-D convolution. `params` holds weights `[out][in/groups][k][k]`
/// followed by `out` biases.
pub fn conv_forward(x: &FeatureMap, geom: &ConvGeom, params: &[f64]) -> FeatureMap {
    debug_assert_eq!(x.shape.channels, geom.in_channels);
    let (w, b) = params.split_at(geom.weight_len());
    let out_shape = geom.output_shape(x.shape);
    let (ih, iw) = (x.shape.height, x.shape.width);
    let (oh, ow) = (out_shape.height, out_shape.width);
    let (k, s) = (geom.kernel, geom.stride);
    let pt = pad_before(ih, oh, k, s) as isize;
    let pl = pad_before(iw, ow, k, s) as isize;
    let cin_g = geom.in_channels / geom.groups;
    let cout_g = geom.out_channels / geom.groups;
    let mut out = FeatureMap::zeros(out_shape);
    for o in 0..geom.out_channels {
        let g = o / cout_g;
        let dst = &mut out.data[o * oh * ow..(o + 1) * oh * ow];
        dst.fill(b[o]);
        for ci in 0..cin_g {
            let src = x.channel(g * cin_g + ci);
            for ky in 0..k {
                for kx in 0..k {
                    let wv = w[((o * cin_g + ci) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * s) as isize + ky as isize - pt;
                        if iy < 0 || iy >= ih as isize {
                            continue;
                        }
                        let row = &src[iy as usize * iw..(iy as usize + 1) * iw];
                        let drow = &mut dst[oy * ow..(oy + 1) * ow];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            let ix = (ox * s) as isize + kx as isize - pl;
                            if ix >= 0 && ix < iw as isize {
                                *d += wv * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns dL/dx and accumulates dL/dparams into `grad`.
pub fn conv_backward(x: &FeatureMap, geom: &ConvGeom, params: &[f64], dy: &FeatureMap, grad: &mut [f64]) -> FeatureMap {
    let wlen = geom.weight_len();
    let w = &params[..wlen];
    let (gw, gb) = grad.split_at_mut(wlen);
    let (ih, iw) = (x.shape.height, x.shape.width);
    let (oh, ow) = (dy.shape.height, dy.shape.width);
    let (k, s) = (geom.kernel, geom.stride);
    let pt = pad_before(ih, oh, k, s) as isize;
    let pl = pad_before(iw, ow, k, s) as isize;
    let cin_g = geom.in_channels / geom.groups;
    let cout_g = geom.out_channels / geom.groups;
    let mut dx = FeatureMap::zeros(x.shape);
    for o in 0..geom.out_channels {
        let g = o / cout_g;
        let dyo = dy.channel(o);
        gb[o] += dyo.iter().sum::<f64>();
        for ci in 0..cin_g {
            let c = g * cin_g + ci;
            let src = x.channel(c);
            let dsrc = &mut dx.data[c * ih * iw..(c + 1) * ih * iw];
            for ky in 0..k {
                for kx in 0..k {
                    let wi = ((o * cin_g + ci) * k + ky) * k + kx;
                    let wv = w[wi];
                    let mut acc = 0.0;
                    for oy in 0..oh {
                        let iy = (oy * s) as isize + ky as isize - pt;
                        if iy < 0 || iy >= ih as isize {
                            continue;
                        }
                        let base = iy as usize * iw;
                        for ox in 0..ow {
                            let ix = (ox * s) as isize + kx as isize - pl;
                            if ix >= 0 && ix < iw as isize {
                                let gy = dyo[oy * ow + ox];
                                acc += gy * src[base + ix as usize];
                                dsrc[base + ix as usize] += gy * wv;
                            }
                        }
                    }
                    gw[wi] += acc;
                }
            }
        }
    }
    dx
}

/// Spatial pooling with "same" padding; padded cells are ignored (max) or
/// excluded from the average. Returns the output and, for max pooling, the
/// flat input index selected for every output cell.
pub fn pool_forward(x: &FeatureMap, mode: PoolMode, kernel: usize, stride: usize) -> (FeatureMap, Vec<usize>) {
    let (ih, iw) = (x.shape.height, x.shape.width);
    let (oh, ow) = (ih.div_ceil(stride), iw.div_ceil(stride));
    let pt = pad_before(ih, oh, kernel, stride) as isize;
    let pl = pad_before(iw, ow, kernel, stride) as isize;
    let out_shape = Shape::new(x.shape.channels, oh, ow);
    let mut out = FeatureMap::zeros(out_shape);
    let mut argmax = if mode == PoolMode::Max { vec![0; out_shape.numel()] } else { Vec::new() };
    for c in 0..x.shape.channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                let mut sum = 0.0;
                let mut n = 0usize;
                for ky in 0..kernel {
                    let iy = (oy * stride) as isize + ky as isize - pt;
                    if iy < 0 || iy >= ih as isize {
                        continue;
                    }
                    for kx in 0..kernel {
                        let ix = (ox * stride) as isize + kx as isize - pl;
                        if ix < 0 || ix >= iw as isize {
                            continue;
                        }
                        let i = (c * ih + iy as usize) * iw + ix as usize;
                        let v = x.data[i];
                        if v > best {
                            best = v;
                            best_i = i;
                        }
                        sum += v;
                        n += 1;
                    }
                }
                let o = (c * oh + oy) * ow + ox;
                match mode {
                    PoolMode::Max => {
                        out.data[o] = best;
                        argmax[o] = best_i;
                    }
                    PoolMode::Avg => out.data[o] = sum / n as f64,
                }
            }
        }
    }
    (out, argmax)
}

pub fn pool_backward(
    x_shape: Shape,
    mode: PoolMode,
    kernel: usize,
    stride: usize,
    argmax: &[usize],
    dy: &FeatureMap,
) -> FeatureMap {
    let mut dx = FeatureMap::zeros(x_shape);
    match mode {
        PoolMode::Max => {
            for (o, &i) in argmax.iter().enumerate() {
                dx.data[i] += dy.data[o];
            }
        }
        PoolMode::Avg => {
            let (ih, iw) = (x_shape.height, x_shape.width);
            let (oh, ow) = (dy.shape.height, dy.shape.width);
            let pt = pad_before(ih, oh, kernel, stride) as isize;
            let pl = pad_before(iw, ow, kernel, stride) as isize;
            for c in 0..x_shape.channels {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let ys: Vec<usize> = (0..kernel)
                            .map(|ky| (oy * stride) as isize + ky as isize - pt)
                            .filter(|&iy| iy >= 0 && iy < ih as isize)
                            .map(|iy| iy as usize)
                            .collect();
                        let xs: Vec<usize> = (0..kernel)
                            .map(|kx| (ox * stride) as isize + kx as isize - pl)
                            .filter(|&ix| ix >= 0 && ix < iw as isize)
                            .map(|ix| ix as usize)
                            .collect();
                        let g = dy.data[(c * oh + oy) * ow + ox] / (ys.len() * xs.len()) as f64;
                        for &iy in &ys {
                            for &ix in &xs {
                                dx.data[(c * ih + iy) * iw + ix] += g;
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

pub fn global_pool_forward(x: &FeatureMap) -> FeatureMap {
    let hw = (x.shape.height * x.shape.width) as f64;
    let data = (0..x.shape.channels).map(|c| x.channel(c).iter().sum::<f64>() / hw).collect();
    FeatureMap::new(Shape::new(x.shape.channels, 1, 1), data)
}

pub fn global_pool_backward(x_shape: Shape, dy: &FeatureMap) -> FeatureMap {
    let hw = x_shape.height * x_shape.width;
    let mut dx = FeatureMap::zeros(x_shape);
    for c in 0..x_shape.channels {
        let g = dy.data[c] / hw as f64;
        dx.data[c * hw..(c + 1) * hw].fill(g);
    }
    dx
}

/// `params`: weights `[out][in]` then `out` biases. The input is flattened.
pub fn dense_forward(x: &FeatureMap, nin: usize, nout: usize, params: &[f64]) -> FeatureMap {
    let (w, b) = params.split_at(nin * nout);
    let data = (0..nout)
        .map(|o| b[o] + w[o * nin..(o + 1) * nin].iter().zip(&x.data).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    FeatureMap::new(Shape::new(nout, 1, 1), data)
}

pub fn dense_backward(x: &FeatureMap, nin: usize, nout: usize, params: &[f64], dy: &FeatureMap, grad: &mut [f64]) -> FeatureMap {
    let w = &params[..nin * nout];
    let (gw, gb) = grad.split_at_mut(nin * nout);
    let mut dx = FeatureMap::zeros(x.shape);
    for o in 0..nout {
        let g = dy.data[o];
        gb[o] += g;
        for i in 0..nin {
            gw[o * nin + i] += g * x.data[i];
            dx.data[i] += g * w[o * nin + i];
        }
    }
    dx
}

pub fn activation_forward(x: &FeatureMap, act: Activation) -> FeatureMap {
    match act {
        Activation::Identity => x.clone(),
        Activation::Relu => FeatureMap { shape: x.shape, data: x.data.iter().map(|&v| v.max(0.0)).collect() },
    }
}

/// Uses the forward *output*: relu'(z) = 1 where out > 0.
pub fn activation_backward(out: &FeatureMap, act: Activation, dy: &FeatureMap) -> FeatureMap {
    match act {
        Activation::Identity => dy.clone(),
        Activation::Relu => FeatureMap {
            shape: dy.shape,
            data: out.data.iter().zip(&dy.data).map(|(&o, &g)| if o > 0.0 { g } else { 0.0 }).collect(),
        },
    }
}
