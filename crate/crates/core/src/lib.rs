//! Chest X-ray SARS-CoV-2 screening pipeline.
//!
//! The crate is organised as a set of loosely coupled stages:
//!
//! - [`dataman`]: ingest per-cohort manifests, unify them, split by patient
//!   and report demographics.
//! - [`pixelpipe`]: crop / resize / normalize and seeded augmentation.
//! - [`archnet`]: declarative light-weight CNN specs (point-wise, depth-wise,
//!   PRPE blocks, long-range connections), forward/backward passes and loss.
//! - [`complexity`]: analytic parameter and MAC accounting over a spec.
//! - [`trainer`]: class-rebalanced batching, Adam, early stopping and the
//!   sensitivity/PPV constraint gate.
//! - [`metrics`]: confusion matrix, sensitivity / PPV / accuracy and report
//!   rendering.
//! - [`factorscope`]: occlusion-based critical-factor search and overlays.

pub mod archnet;
pub mod complexity;
pub mod dataman;
pub mod factorscope;
pub mod metrics;
pub mod percent;
pub mod pixelpipe;
pub mod trainer;

pub use archnet::{ArchSpec, Model};
pub use dataman::{DatasetManifest, ImageRecord};
pub use metrics::{ConfusionMatrix, MetricsReport};
pub use pixelpipe::ImageBuffer;
