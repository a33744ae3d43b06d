use super::loss::{bce_dlogit, bce_term, sigmoid};
use super::ops::{self, ConvGeom, FeatureMap};
use super::spec::{Activation, ArchSpec, LayerSpec, PoolMode, PrpeBlockSpec, Replication, Shape, ShapePlan};
use super::{ModelError, SpecError};
use crate::pixelpipe::ImageBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
struct ConvUnit {
    geom: ConvGeom,
    offset: usize,
}

impl ConvUnit {
    fn alloc(geom: ConvGeom, cursor: &mut usize) -> Self {
        let u = ConvUnit { geom, offset: *cursor };
        *cursor += geom.param_len();
        u
    }

    fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.geom.param_len()
    }

    fn forward(&self, params: &[f64], x: &FeatureMap) -> FeatureMap {
        ops::conv_forward(x, &self.geom, &params[self.range()])
    }

    fn backward(&self, params: &[f64], x: &FeatureMap, dy: &FeatureMap, grad: &mut [f64]) -> FeatureMap {
        ops::conv_backward(x, &self.geom, &params[self.range()], dy, &mut grad[self.range()])
    }

    fn pointwise(cin: usize, cout: usize, stride: usize, cursor: &mut usize) -> Self {
        Self::alloc(ConvGeom { in_channels: cin, out_channels: cout, kernel: 1, stride, groups: 1 }, cursor)
    }
}

#[derive(Debug, Clone)]
struct PrpeUnit {
    spec: PrpeBlockSpec,
    proj: ConvUnit,
    branches: Vec<ConvUnit>,
    reproj: ConvUnit,
    expand: ConvUnit,
}

struct PrpeCache {
    a1: FeatureMap,
    merged: FeatureMap,
    a3: FeatureMap,
    out: FeatureMap,
}

impl PrpeUnit {
    fn alloc(spec: PrpeBlockSpec, cursor: &mut usize) -> Self {
        let internal = spec.internal_channels();
        let proj = ConvUnit::pointwise(spec.in_channels, internal, 1, cursor);
        let branches = (0..spec.replicas)
            .map(|_| {
                ConvUnit::alloc(
                    ConvGeom { in_channels: internal, out_channels: internal, kernel: spec.kernel, stride: 1, groups: internal },
                    cursor,
                )
            })
            .collect();
        let reproj = ConvUnit::pointwise(spec.replicated_channels(), internal, 1, cursor);
        let expand = ConvUnit::pointwise(internal, spec.expand_channels, 1, cursor);
        PrpeUnit { spec, proj, branches, reproj, expand }
    }

    fn forward(&self, params: &[f64], x: &FeatureMap) -> PrpeCache {
        let act = self.spec.activation;
        let a1 = ops::activation_forward(&self.proj.forward(params, x), act);
        let outs: Vec<FeatureMap> = self.branches.iter().map(|b| b.forward(params, &a1)).collect();
        let merged_pre = match self.spec.replication {
            Replication::Sum => {
                let mut it = outs.into_iter();
                let mut acc = it.next().expect("replicas >= 1");
                for o in it {
                    acc.add_assign(&o);
                }
                acc
            }
            Replication::Concat => {
                let shape = Shape::new(self.spec.replicated_channels(), a1.shape.height, a1.shape.width);
                FeatureMap::new(shape, outs.into_iter().flat_map(|o| o.data).collect())
            }
        };
        let merged = ops::activation_forward(&merged_pre, act);
        let a3 = ops::activation_forward(&self.reproj.forward(params, &merged), act);
        let out = ops::activation_forward(&self.expand.forward(params, &a3), act);
        PrpeCache { a1, merged, a3, out }
    }

    fn backward(&self, params: &[f64], x: &FeatureMap, c: &PrpeCache, dy: &FeatureMap, grad: &mut [f64]) -> FeatureMap {
        let act = self.spec.activation;
        let d = ops::activation_backward(&c.out, act, dy);
        let d_a3 = self.expand.backward(params, &c.a3, &d, grad);
        let d = ops::activation_backward(&c.a3, act, &d_a3);
        let d_merged = self.reproj.backward(params, &c.merged, &d, grad);
        let d = ops::activation_backward(&c.merged, act, &d_merged);
        let mut d_a1 = FeatureMap::zeros(c.a1.shape);
        let per = c.a1.shape.numel();
        for (i, b) in self.branches.iter().enumerate() {
            let db = match self.spec.replication {
                Replication::Sum => b.backward(params, &c.a1, &d, grad),
                Replication::Concat => {
                    let slice = FeatureMap::new(c.a1.shape, d.data[i * per..(i + 1) * per].to_vec());
                    b.backward(params, &c.a1, &slice, grad)
                }
            };
            d_a1.add_assign(&db);
        }
        let d = ops::activation_backward(&c.a1, act, &d_a1);
        self.proj.backward(params, x, &d, grad)
    }

    fn stages(&self) -> PrpeStages {
        PrpeStages {
            projection: self.proj.range(),
            replicas: self.branches.iter().map(ConvUnit::range).collect(),
            reprojection: self.reproj.range(),
            expansion: self.expand.range(),
        }
    }
}

/// Parameter ranges of each PRPE stage (weights followed by biases).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrpeStages {
    pub projection: Range<usize>,
    pub replicas: Vec<Range<usize>>,
    pub reprojection: Range<usize>,
    pub expansion: Range<usize>,
}

#[derive(Debug, Clone)]
enum Op {
    Conv(ConvUnit),
    Pool { mode: PoolMode, kernel: usize, stride: usize },
    GlobalPool,
    Dense { nin: usize, nout: usize, offset: usize },
    Act(Activation),
    Prpe(PrpeUnit),
}

enum Cache {
    None,
    Pool(Vec<usize>),
    Prpe(PrpeCache),
}

#[derive(Debug, Clone)]
struct Edge {
    from: usize,
    to: usize,
    adapter: Option<ConvUnit>,
}

/// Everything recorded by a forward pass that backward needs.
pub struct Trace {
    pub input: FeatureMap,
    /// Output of each layer after long-range additions.
    pub outputs: Vec<FeatureMap>,
    /// Output of each layer before long-range additions (only for edge
    /// targets).
    raw: Vec<Option<FeatureMap>>,
    caches: Vec<Cache>,
    pub logit: f64,
}

impl Trace {
    pub fn probability(&self) -> f64 {
        clip_probability(sigmoid(self.logit))
    }
}

/// Keeps the sigmoid output strictly inside (0, 1) in floating point.
fn clip_probability(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// A network realized from an [`ArchSpec`] with all parameters in one flat
/// vector: layers in order, then long-range adapters, then the head.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ArchSpec,
    plan: ShapePlan,
    ops: Vec<Op>,
    edges: Vec<Edge>,
    head_offset: usize,
    params: Vec<f64>,
}

/// Builds a model with fan-in scaled uniform weights (`U(-b, b)`,
/// `b = sqrt(6 / fan_in)`) and zero biases.
pub fn build_model(spec: &ArchSpec, seed: u64) -> Result<Model, SpecError> {
    Model::new(spec.clone(), seed)
}

impl Model {
    pub fn new(spec: ArchSpec, seed: u64) -> Result<Self, SpecError> {
        let plan = spec.shape_plan()?;
        let mut cursor = 0usize;
        let mut inputs = Vec::with_capacity(spec.layers.len());
        let mut prev = plan.input;
        for out in &plan.outputs {
            inputs.push(prev);
            prev = *out;
        }
        let ops: Vec<Op> = spec
            .layers
            .iter()
            .zip(&inputs)
            .map(|(layer, input)| match *layer {
                LayerSpec::ConvStandard { in_channels, out_channels, kernel, stride } => Op::Conv(ConvUnit::alloc(
                    ConvGeom { in_channels, out_channels, kernel, stride, groups: 1 },
                    &mut cursor,
                )),
                LayerSpec::ConvPointwise { in_channels, out_channels, stride } => {
                    Op::Conv(ConvUnit::pointwise(in_channels, out_channels, stride, &mut cursor))
                }
                LayerSpec::ConvDepthwise { channels, multiplier, kernel, stride } => Op::Conv(ConvUnit::alloc(
                    ConvGeom { in_channels: channels, out_channels: channels * multiplier, kernel, stride, groups: channels },
                    &mut cursor,
                )),
                LayerSpec::PrpeBlock(b) => Op::Prpe(PrpeUnit::alloc(b, &mut cursor)),
                LayerSpec::Pool { mode, kernel, stride } => Op::Pool { mode, kernel, stride },
                LayerSpec::GlobalPool => Op::GlobalPool,
                LayerSpec::Dense { in_features, out_features } => {
                    debug_assert_eq!(in_features, input.numel());
                    let op = Op::Dense { nin: in_features, nout: out_features, offset: cursor };
                    cursor += in_features * out_features + out_features;
                    op
                }
                LayerSpec::Activation { function } => Op::Act(function),
            })
            .collect();
        let edges = spec
            .long_range_edges
            .iter()
            .zip(&plan.adapters)
            .map(|(&(from, to), adapter)| Edge {
                from,
                to,
                adapter: adapter.map(|(cin, cout)| ConvUnit::pointwise(cin, cout, 1, &mut cursor)),
            })
            .collect();
        let head_offset = cursor;
        cursor += spec.head.in_features + 1;

        let mut model = Model { spec, plan, ops, edges, head_offset, params: vec![0.0; cursor] };
        model.init(seed);
        Ok(model)
    }

    fn init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |params: &mut [f64], weights: Range<usize>, fan_in: usize| {
            let bound = (6.0 / fan_in.max(1) as f64).sqrt();
            for p in &mut params[weights] {
                *p = rng.random_range(-bound..bound);
            }
        };
        let mut convs: Vec<ConvUnit> = Vec::new();
        for op in &self.ops {
            match op {
                Op::Conv(u) => convs.push(*u),
                Op::Prpe(p) => {
                    convs.push(p.proj);
                    convs.extend(p.branches.iter().copied());
                    convs.push(p.reproj);
                    convs.push(p.expand);
                }
                Op::Dense { nin, nout, offset } => fill(&mut self.params, *offset..offset + nin * nout, *nin),
                _ => {}
            }
        }
        convs.extend(self.edges.iter().filter_map(|e| e.adapter));
        for u in convs {
            fill(&mut self.params, u.offset..u.offset + u.geom.weight_len(), u.geom.fan_in());
        }
        let n = self.spec.head.in_features;
        fill(&mut self.params, self.head_offset..self.head_offset + n, n);
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    pub fn shape_plan(&self) -> &ShapePlan {
        &self.plan
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), ModelError> {
        if params.len() != self.params.len() {
            return Err(ModelError::Length(format!("model has {} parameters, got {}", self.params.len(), params.len())));
        }
        self.params = params;
        Ok(())
    }

    /// Parameter ranges of the PRPE block at `layer`, if it is one.
    pub fn prpe_stages(&self, layer: usize) -> Option<PrpeStages> {
        match self.ops.get(layer)? {
            Op::Prpe(p) => Some(p.stages()),
            _ => None,
        }
    }

    pub fn head_range(&self) -> Range<usize> {
        self.head_offset..self.head_offset + self.spec.head.in_features + 1
    }

    pub fn input_shape(&self) -> Shape {
        self.spec.input
    }

    pub fn forward_trace(&self, x: FeatureMap) -> Result<Trace, ModelError> {
        if x.shape != self.spec.input {
            return Err(ModelError::InputShape { expected: self.spec.input, got: x.shape });
        }
        let p = &self.params;
        let n = self.ops.len();
        let mut outputs: Vec<FeatureMap> = Vec::with_capacity(n);
        let mut raw: Vec<Option<FeatureMap>> = Vec::with_capacity(n);
        let mut caches = Vec::with_capacity(n);
        for (i, op) in self.ops.iter().enumerate() {
            let input = if i == 0 { &x } else { &outputs[i - 1] };
            let (mut out, cache) = match op {
                Op::Conv(u) => (u.forward(p, input), Cache::None),
                Op::Pool { mode, kernel, stride } => {
                    let (o, arg) = ops::pool_forward(input, *mode, *kernel, *stride);
                    (o, Cache::Pool(arg))
                }
                Op::GlobalPool => (ops::global_pool_forward(input), Cache::None),
                Op::Dense { nin, nout, offset } => {
                    (ops::dense_forward(input, *nin, *nout, &p[*offset..offset + nin * nout + nout]), Cache::None)
                }
                Op::Act(a) => (ops::activation_forward(input, *a), Cache::None),
                Op::Prpe(u) => {
                    let c = u.forward(p, input);
                    (c.out.clone(), Cache::Prpe(c))
                }
            };
            let incoming: Vec<&Edge> = self.edges.iter().filter(|e| e.to == i).collect();
            if incoming.is_empty() {
                raw.push(None);
            } else {
                raw.push(Some(out.clone()));
                for e in incoming {
                    match &e.adapter {
                        Some(a) => out.add_assign(&a.forward(p, &outputs[e.from])),
                        None => out.add_assign(&outputs[e.from]),
                    }
                }
            }
            outputs.push(out);
            caches.push(cache);
        }
        let feats = outputs.last().unwrap_or(&x);
        let nin = self.spec.head.in_features;
        let w = &p[self.head_offset..self.head_offset + nin];
        let logit = p[self.head_offset + nin] + w.iter().zip(&feats.data).map(|(a, b)| a * b).sum::<f64>();
        if !logit.is_finite() {
            return Err(ModelError::NonFinite);
        }
        Ok(Trace { input: x, outputs, raw, caches, logit })
    }

    /// Gradient of the parameters given dL/dlogit.
    pub fn backward(&self, trace: &Trace, dlogit: f64) -> Vec<f64> {
        let p = &self.params;
        let mut grad = vec![0.0; p.len()];
        let n = self.ops.len();
        let nin = self.spec.head.in_features;
        let feats = trace.outputs.last().unwrap_or(&trace.input);
        let head_w = &p[self.head_offset..self.head_offset + nin];
        {
            let gh = &mut grad[self.head_offset..self.head_offset + nin + 1];
            for (g, f) in gh.iter_mut().zip(&feats.data) {
                *g += dlogit * f;
            }
            gh[nin] += dlogit;
        }
        if n == 0 {
            return grad;
        }
        let mut gout: Vec<Option<FeatureMap>> = (0..n).map(|_| None).collect();
        gout[n - 1] = Some(FeatureMap::new(feats.shape, head_w.iter().map(|w| w * dlogit).collect()));
        for i in (0..n).rev() {
            let Some(g) = gout[i].take() else { continue };
            for e in self.edges.iter().filter(|e| e.to == i) {
                let back = match &e.adapter {
                    Some(a) => a.backward(p, &trace.outputs[e.from], &g, &mut grad),
                    None => g.clone(),
                };
                accumulate(&mut gout[e.from], back);
            }
            let input = if i == 0 { &trace.input } else { &trace.outputs[i - 1] };
            let own_out = trace.raw[i].as_ref().unwrap_or(&trace.outputs[i]);
            let dx = match (&self.ops[i], &trace.caches[i]) {
                (Op::Conv(u), _) => u.backward(p, input, &g, &mut grad),
                (Op::Pool { mode, kernel, stride }, Cache::Pool(arg)) => {
                    ops::pool_backward(input.shape, *mode, *kernel, *stride, arg, &g)
                }
                (Op::GlobalPool, _) => ops::global_pool_backward(input.shape, &g),
                (Op::Dense { nin, nout, offset }, _) => {
                    let r = *offset..offset + nin * nout + nout;
                    ops::dense_backward(input, *nin, *nout, &p[r.clone()], &g, &mut grad[r])
                }
                (Op::Act(a), _) => ops::activation_backward(own_out, *a, &g),
                (Op::Prpe(u), Cache::Prpe(c)) => u.backward(p, input, c, &g, &mut grad),
                _ => unreachable!("cache kind matches op kind"),
            };
            if i > 0 {
                accumulate(&mut gout[i - 1], dx);
            }
        }
        grad
    }

    pub fn logit(&self, img: &ImageBuffer) -> Result<f64, ModelError> {
        Ok(self.forward_trace(image_to_map(img))?.logit)
    }

    /// Probability of the positive class for one image.
    pub fn predict(&self, img: &ImageBuffer) -> Result<f64, ModelError> {
        Ok(self.forward_trace(image_to_map(img))?.probability())
    }

    /// Per-image probabilities; batch order is preserved.
    pub fn forward(&self, batch: &[ImageBuffer]) -> Result<Vec<f64>, ModelError> {
        #[cfg(feature = "parallel")]
        let it = batch.par_iter();
        #[cfg(not(feature = "parallel"))]
        let it = batch.iter();
        it.map(|img| self.predict(img)).collect()
    }

    /// Mean BCE over the batch and its gradient.
    pub fn loss_and_grad(&self, batch: &[ImageBuffer], labels: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        if batch.len() != labels.len() || batch.is_empty() {
            return Err(ModelError::Length(format!("{} images vs {} labels", batch.len(), labels.len())));
        }
        let one = |(img, &y): (&ImageBuffer, &f64)| -> Result<(f64, Vec<f64>), ModelError> {
            let trace = self.forward_trace(image_to_map(img))?;
            let p = trace.probability();
            Ok((bce_term(p, y), self.backward(&trace, bce_dlogit(p, y))))
        };
        #[cfg(feature = "parallel")]
        let per: Vec<(f64, Vec<f64>)> = batch.par_iter().zip(labels.par_iter()).map(one).collect::<Result<_, _>>()?;
        #[cfg(not(feature = "parallel"))]
        let per: Vec<(f64, Vec<f64>)> = batch.iter().zip(labels.iter()).map(one).collect::<Result<_, _>>()?;
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.params.len()];
        for (l, g) in per {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((loss * scale, grad))
    }

    /// Mean BCE without gradients.
    pub fn loss(&self, batch: &[ImageBuffer], labels: &[f64]) -> Result<f64, ModelError> {
        super::bce_loss(&self.forward(batch)?, labels)
    }
}

fn accumulate(slot: &mut Option<FeatureMap>, g: FeatureMap) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

pub fn image_to_map(img: &ImageBuffer) -> FeatureMap {
    FeatureMap::new(Shape::new(1, img.height(), img.width()), img.pixels().iter().map(|&v| v as f64).collect())
}

/// A standalone PRPE block with its own parameters.
#[derive(Debug, Clone)]
pub struct PrpeBlock {
    unit: PrpeUnit,
    params: Vec<f64>,
}

impl PrpeBlock {
    /// Zero-initialized block.
    pub fn new(spec: PrpeBlockSpec) -> Result<Self, SpecError> {
        spec.validate().map_err(SpecError::spec)?;
        let mut cursor = 0;
        let unit = PrpeUnit::alloc(spec, &mut cursor);
        Ok(PrpeBlock { unit, params: vec![0.0; cursor] })
    }

    pub fn spec(&self) -> &PrpeBlockSpec {
        &self.unit.spec
    }

    pub fn stages(&self) -> PrpeStages {
        self.unit.stages()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &FeatureMap) -> Result<FeatureMap, ModelError> {
        if x.shape.channels != self.unit.spec.in_channels {
            return Err(ModelError::InputShape {
                expected: Shape::new(self.unit.spec.in_channels, x.shape.height, x.shape.width),
                got: x.shape,
            });
        }
        Ok(self.unit.forward(&self.params, x).out)
    }
}
