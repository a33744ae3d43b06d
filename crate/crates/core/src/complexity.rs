//! Analytic parameter and multiply-accumulate counts.
//!
//! Conventions: one MAC is one multiply plus one accumulate; biases,
//! activations, pooling and skip additions cost zero MACs; convolutions use
//! "same" padding (`out = ceil(in / stride)`) and every kernel tap counts,
//! including taps that land on padding.

use crate::archnet::{ArchSpec, LayerSpec, Shape, SpecError};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    /// Layer index, or `None` for adapters and the head.
    pub layer_index: Option<usize>,
    pub name: String,
    pub params: u64,
    pub macs: u64,
    pub output_shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub total_params: u64,
    pub total_macs: u64,
    pub input: Shape,
    pub per_layer: Vec<LayerCost>,
}

fn conv_cost(k: u64, cin_per_group: u64, cout: u64, out: Shape) -> (u64, u64) {
    let params = k * k * cin_per_group * cout + cout;
    let macs = k * k * cin_per_group * cout * (out.height * out.width) as u64;
    (params, macs)
}

fn layer_cost(layer: &LayerSpec, out: Shape) -> (u64, u64) {
    match *layer {
        LayerSpec::ConvStandard { in_channels, out_channels, kernel, .. } => {
            conv_cost(kernel as u64, in_channels as u64, out_channels as u64, out)
        }
        LayerSpec::ConvPointwise { in_channels, out_channels, .. } => conv_cost(1, in_channels as u64, out_channels as u64, out),
        LayerSpec::ConvDepthwise { channels, multiplier, kernel, .. } => {
            conv_cost(kernel as u64, 1, (channels * multiplier) as u64, out)
        }
        LayerSpec::PrpeBlock(b) => {
            let internal = b.internal_channels() as u64;
            let inner = Shape::new(internal as usize, out.height, out.width);
            let mut total = conv_cost(1, b.in_channels as u64, internal, inner);
            for _ in 0..b.replicas {
                let (p, m) = conv_cost(b.kernel as u64, 1, internal, inner);
                total.0 += p;
                total.1 += m;
            }
            let (p, m) = conv_cost(1, b.replicated_channels() as u64, internal, inner);
            let (q, n) = conv_cost(1, internal, b.expand_channels as u64, out);
            (total.0 + p + q, total.1 + m + n)
        }
        LayerSpec::Dense { in_features, out_features } => {
            let (i, o) = (in_features as u64, out_features as u64);
            (i * o + o, i * o)
        }
        LayerSpec::Pool { .. } | LayerSpec::GlobalPool | LayerSpec::Activation { .. } => (0, 0),
    }
}

/// Parameter and MAC counts at the spec's own input resolution.
pub fn analyze(spec: &ArchSpec) -> Result<ComplexityReport, SpecError> {
    let plan = spec.shape_plan()?;
    let mut per_layer = Vec::with_capacity(spec.layers.len() + spec.long_range_edges.len() + 1);
    for (i, (layer, &out)) in spec.layers.iter().zip(&plan.outputs).enumerate() {
        let (params, macs) = layer_cost(layer, out);
        per_layer.push(LayerCost { layer_index: Some(i), name: layer.kind().into(), params, macs, output_shape: out });
    }
    for (&(from, to), adapter) in spec.long_range_edges.iter().zip(&plan.adapters) {
        if let Some((cin, cout)) = *adapter {
            let out = plan.outputs[to];
            let (params, macs) = conv_cost(1, cin as u64, cout as u64, out);
            per_layer.push(LayerCost { layer_index: None, name: format!("adapter {from}->{to}"), params, macs, output_shape: out });
        }
    }
    let n = spec.head.in_features as u64;
    per_layer.push(LayerCost {
        layer_index: None,
        name: "head".into(),
        params: n + 1,
        macs: n,
        output_shape: Shape::new(1, 1, 1),
    });
    Ok(ComplexityReport {
        total_params: per_layer.iter().map(|l| l.params).sum(),
        total_macs: per_layer.iter().map(|l| l.macs).sum(),
        input: spec.input,
        per_layer,
    })
}

pub fn count_params(spec: &ArchSpec) -> Result<u64, SpecError> {
    analyze(spec).map(|r| r.total_params)
}

/// MACs with `input` substituted for the spec's input shape.
pub fn count_macs(spec: &ArchSpec, input: Shape) -> Result<u64, SpecError> {
    let mut s = spec.clone();
    s.input = input;
    analyze(&s).map(|r| r.total_macs)
}

impl ComplexityReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<6} {:<16} {:>12} {:>16}  output", "layer", "kind", "params", "macs");
        for l in &self.per_layer {
            let idx = l.layer_index.map(|i| i.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{:<6} {:<16} {:>12} {:>16}  {}", idx, l.name, l.params, l.macs, l.output_shape);
        }
        let _ = writeln!(
            out,
            "total  params={} ({:.4} M)  macs={} ({:.4} G)  input={}",
            self.total_params,
            self.total_params as f64 / 1e6,
            self.total_macs,
            self.total_macs as f64 / 1e9,
            self.input
        );
        out
    }
}
