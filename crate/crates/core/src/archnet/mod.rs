//! Light-weight CNN specs and a scalar reference implementation.
//!
//! An [`ArchSpec`] is a declarative chain of layers (standard, point-wise and
//! depth-wise convolutions, PRPE blocks, pooling, dense, activations) with
//! additive long-range edges. [`Model`] realizes any valid spec, keeps all
//! parameters in one flat vector and provides forward, backward and binary
//! cross-entropy.

mod checkpoint;
mod loss;
mod model;
pub mod ops;
mod spec;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{bce_loss, sigmoid, LOSS_EPS};
pub use model::{build_model, image_to_map, Model, PrpeBlock, PrpeStages, Trace};
pub use ops::FeatureMap;
pub use spec::{Activation, ArchSpec, HeadSpec, LayerSpec, PoolMode, PrpeBlockSpec, Replication, Shape, ShapePlan};

use std::fmt;

/// Invalid architecture; `layer` names the offending layer when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError {
    pub layer: Option<usize>,
    pub msg: String,
}

impl SpecError {
    pub(crate) fn layer(i: usize, msg: impl Into<String>) -> Self {
        SpecError { layer: Some(i), msg: msg.into() }
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        SpecError { layer: None, msg: msg.into() }
    }

    pub(crate) fn head(msg: impl Into<String>) -> Self {
        SpecError { layer: None, msg: format!("head: {}", msg.into()) }
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.layer {
            Some(i) => write!(f, "spec error at layer {i}: {}", self.msg),
            None => write!(f, "spec error: {}", self.msg),
        }
    }
}

impl std::error::Error for SpecError {}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("input shape {got} does not match expected {expected}")]
    InputShape { expected: Shape, got: Shape },
    #[error("length mismatch: {0}")]
    Length(String),
    #[error("non-finite model output")]
    NonFinite,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
