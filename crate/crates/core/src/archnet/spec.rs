use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use super::SpecError;

/// Feature-map shape: channels x height x width. Vectors are `n x 1 x 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape { channels, height, width }
    }

    pub fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    #[default]
    Max,
    Avg,
}

/// How the parallel depth-wise branches of a PRPE block are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replication {
    #[default]
    Sum,
    Concat,
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

/// Projection → replication → projection → expansion block.
///
/// 1x1 conv down to `internal_channels()`, `replicas` parallel depth-wise
/// convs merged by [`Replication`], a second 1x1 projection back to the
/// internal width, then a 1x1 expansion to `expand_channels`. The activation
/// follows every stage; spatial dims are preserved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrpeBlockSpec {
    pub in_channels: usize,
    pub project_ratio: f64,
    pub replicas: usize,
    pub expand_channels: usize,
    #[serde(default = "three")]
    pub kernel: usize,
    #[serde(default)]
    pub replication: Replication,
    #[serde(default)]
    pub activation: Activation,
}

impl PrpeBlockSpec {
    pub fn new(in_channels: usize, project_ratio: f64, replicas: usize, expand_channels: usize) -> Self {
        PrpeBlockSpec {
            in_channels,
            project_ratio,
            replicas,
            expand_channels,
            kernel: 3,
            replication: Replication::Sum,
            activation: Activation::Relu,
        }
    }

    pub fn internal_channels(&self) -> usize {
        ((self.in_channels as f64 * self.project_ratio).round() as usize).max(1)
    }

    /// Channels entering the second projection.
    pub fn replicated_channels(&self) -> usize {
        match self.replication {
            Replication::Sum => self.internal_channels(),
            Replication::Concat => self.internal_channels() * self.replicas,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.in_channels == 0 {
            return Err("PRPE in_channels must be positive".into());
        }
        if !(self.project_ratio > 0.0 && self.project_ratio <= 1.0) {
            return Err(format!("PRPE project_ratio must be in (0, 1], got {}", self.project_ratio));
        }
        if self.replicas == 0 {
            return Err("PRPE replicas must be >= 1".into());
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(format!("PRPE kernel must be odd, got {}", self.kernel));
        }
        if self.expand_channels < self.internal_channels() {
            return Err(format!(
                "PRPE expand_channels {} smaller than internal width {}",
                self.expand_channels,
                self.internal_channels()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    ConvStandard {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    ConvPointwise {
        in_channels: usize,
        out_channels: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    ConvDepthwise {
        channels: usize,
        #[serde(default = "one")]
        multiplier: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    PrpeBlock(PrpeBlockSpec),
    Pool {
        #[serde(default)]
        mode: PoolMode,
        kernel: usize,
        stride: usize,
    },
    GlobalPool,
    Dense {
        in_features: usize,
        out_features: usize,
    },
    Activation {
        #[serde(default)]
        function: Activation,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::ConvStandard { .. } => "conv_standard",
            LayerSpec::ConvPointwise { .. } => "conv_pointwise",
            LayerSpec::ConvDepthwise { .. } => "conv_depthwise",
            LayerSpec::PrpeBlock(_) => "prpe_block",
            LayerSpec::Pool { .. } => "pool",
            LayerSpec::GlobalPool => "global_pool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Activation { .. } => "activation",
        }
    }

    /// Output shape for `input`, or a message describing the mismatch.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, String> {
        let same = |k: usize, s: usize| -> Result<(usize, usize), String> {
            if k == 0 || s == 0 {
                return Err("kernel and stride must be positive".into());
            }
            Ok((input.height.div_ceil(s), input.width.div_ceil(s)))
        };
        let expect_channels = |c: usize| {
            if c == input.channels {
                Ok(())
            } else {
                Err(format!("expects {c} input channels, got {}", input.channels))
            }
        };
        match *self {
            LayerSpec::ConvStandard { in_channels, out_channels, kernel, stride } => {
                expect_channels(in_channels)?;
                if out_channels == 0 {
                    return Err("out_channels must be positive".into());
                }
                let (h, w) = same(kernel, stride)?;
                Ok(Shape::new(out_channels, h, w))
            }
            LayerSpec::ConvPointwise { in_channels, out_channels, stride } => {
                expect_channels(in_channels)?;
                if out_channels == 0 {
                    return Err("out_channels must be positive".into());
                }
                let (h, w) = same(1, stride)?;
                Ok(Shape::new(out_channels, h, w))
            }
            LayerSpec::ConvDepthwise { channels, multiplier, kernel, stride } => {
                expect_channels(channels)?;
                if multiplier == 0 {
                    return Err("depthwise multiplier must be >= 1".into());
                }
                let (h, w) = same(kernel, stride)?;
                Ok(Shape::new(channels * multiplier, h, w))
            }
            LayerSpec::PrpeBlock(b) => {
                b.validate()?;
                expect_channels(b.in_channels)?;
                Ok(Shape::new(b.expand_channels, input.height, input.width))
            }
            LayerSpec::Pool { kernel, stride, .. } => {
                let (h, w) = same(kernel, stride)?;
                Ok(Shape::new(input.channels, h, w))
            }
            LayerSpec::GlobalPool => Ok(Shape::new(input.channels, 1, 1)),
            LayerSpec::Dense { in_features, out_features } => {
                if in_features != input.numel() {
                    return Err(format!("dense expects {in_features} features, got {}", input.numel()));
                }
                if out_features == 0 {
                    return Err("out_features must be positive".into());
                }
                Ok(Shape::new(out_features, 1, 1))
            }
            LayerSpec::Activation { .. } => Ok(input),
        }
    }
}

/// The final dense layer mapping the flattened features to one logit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub in_features: usize,
}

/// Declarative network: a layer chain plus additive long-range edges.
///
/// An edge `(from, to)` adds the output of layer `from` to the output of
/// layer `to`; when channel counts differ a 1x1 adapter conv (with bias) is
/// inserted. Spatial dims at both ends must agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    #[serde(default)]
    pub name: String,
    pub input: Shape,
    #[serde(default)]
    pub long_range_edges: Vec<(usize, usize)>,
    pub head: HeadSpec,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
}

/// Validated shape information for a spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapePlan {
    pub input: Shape,
    /// Output shape of every layer (after skip additions).
    pub outputs: Vec<Shape>,
    /// `Some((in, out))` channel counts for edges needing an adapter.
    pub adapters: Vec<Option<(usize, usize)>>,
}

impl ShapePlan {
    pub fn final_shape(&self) -> Shape {
        self.outputs.last().copied().unwrap_or(self.input)
    }
}

impl ArchSpec {
    pub fn new(name: impl Into<String>, input: Shape, layers: Vec<LayerSpec>) -> Self {
        let mut spec = ArchSpec {
            name: name.into(),
            input,
            long_range_edges: Vec::new(),
            head: HeadSpec { in_features: 0 },
            layers,
        };
        if let Ok(plan) = spec.shape_plan_unchecked_head() {
            spec.head.in_features = plan.final_shape().numel();
        }
        spec
    }

    pub fn with_edges(mut self, edges: Vec<(usize, usize)>) -> Self {
        self.long_range_edges = edges;
        self
    }

    /// Threads the input shape through every layer, checking channel
    /// agreement, skip junctions and the head width.
    pub fn shape_plan(&self) -> Result<ShapePlan, SpecError> {
        let plan = self.shape_plan_unchecked_head()?;
        let feat = plan.final_shape().numel();
        if self.head.in_features != feat {
            return Err(SpecError::head(format!("head expects {} features, network produces {feat}", self.head.in_features)));
        }
        Ok(plan)
    }

    fn shape_plan_unchecked_head(&self) -> Result<ShapePlan, SpecError> {
        if self.input.numel() == 0 {
            return Err(SpecError::spec(format!("input shape {} must be positive", self.input)));
        }
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut current = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.output_shape(current).map_err(|m| SpecError::layer(i, format!("{}: {m}", layer.kind())))?;
            outputs.push(current);
        }
        let mut seen = std::collections::HashSet::new();
        let mut adapters = Vec::with_capacity(self.long_range_edges.len());
        for &(from, to) in &self.long_range_edges {
            if from >= to || to >= self.layers.len() {
                return Err(SpecError::layer(to, format!("long-range edge ({from}, {to}) must go forward within the network")));
            }
            if !seen.insert((from, to)) {
                return Err(SpecError::layer(to, format!("duplicate long-range edge ({from}, {to})")));
            }
            let (a, b) = (outputs[from], outputs[to]);
            if a.spatial() != b.spatial() {
                return Err(SpecError::layer(to, format!("skip junction from layer {from} has spatial shape {a}, layer {to} has {b}")));
            }
            adapters.push((a.channels != b.channels).then_some((a.channels, b.channels)));
        }
        Ok(ShapePlan { input: self.input, outputs, adapters })
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        self.shape_plan().map(|_| ())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ArchSpec serializes to TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::spec(format!("cannot parse spec: {e}")))
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }

    /// Spec with the same layers but a different input resolution. Layers
    /// that depend on resolution (dense) are not rewritten.
    pub fn with_input(mut self, input: Shape) -> Self {
        self.input = input;
        if let Ok(plan) = self.shape_plan_unchecked_head() {
            self.head.in_features = plan.final_shape().numel();
        }
        self
    }

    /// Small reference network exercising every building block: a standard
    /// stem conv, point-wise and depth-wise convs, three PRPE blocks and two
    /// long-range connections (one through a channel adapter).
    pub fn cxr2_tiny() -> Self {
        use LayerSpec::*;
        let layers = vec![
            ConvStandard { in_channels: 1, out_channels: 16, kernel: 3, stride: 2 }, // 0
            Activation { function: super::Activation::Relu },                       // 1
            Pool { mode: PoolMode::Max, kernel: 2, stride: 2 },                      // 2
            PrpeBlock(PrpeBlockSpec::new(16, 0.5, 2, 32)),                           // 3
            ConvDepthwise { channels: 32, multiplier: 1, kernel: 3, stride: 2 },     // 4
            ConvPointwise { in_channels: 32, out_channels: 64, stride: 1 },          // 5
            Activation { function: super::Activation::Relu },                       // 6
            PrpeBlock(PrpeBlockSpec::new(64, 0.5, 2, 64)),                           // 7
            ConvDepthwise { channels: 64, multiplier: 1, kernel: 3, stride: 2 },     // 8
            ConvPointwise { in_channels: 64, out_channels: 128, stride: 1 },         // 9
            Activation { function: super::Activation::Relu },                       // 10
            PrpeBlock(PrpeBlockSpec::new(128, 0.25, 3, 160)),                        // 11
            GlobalPool,                                                              // 12
        ];
        ArchSpec::new("cxr2-tiny", Shape::new(1, 480, 480), layers).with_edges(vec![(5, 7), (9, 11)])
    }

    /// A few hundred parameters on 32×32 inputs, for fast end-to-end runs.
    pub fn prpe_toy() -> Self {
        use LayerSpec::*;
        let layers = vec![
            ConvStandard { in_channels: 1, out_channels: 4, kernel: 3, stride: 1 },
            Activation { function: super::Activation::Relu },
            Pool { mode: PoolMode::Max, kernel: 4, stride: 4 },
            PrpeBlock(PrpeBlockSpec::new(4, 1.0, 2, 8)),
            ConvPointwise { in_channels: 8, out_channels: 8, stride: 1 },
            Pool { mode: PoolMode::Max, kernel: 8, stride: 8 },
            GlobalPool,
        ];
        ArchSpec::new("prpe-toy", Shape::new(1, 32, 32), layers).with_edges(vec![(2, 4)])
    }

    /// Resolves a built-in spec name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "cxr2-tiny" => Some(Self::cxr2_tiny()),
            "prpe-toy" => Some(Self::prpe_toy()),
            _ => None,
        }
    }
}
