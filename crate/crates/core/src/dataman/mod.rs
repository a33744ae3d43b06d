//! Benchmark dataset assembly.
//!
//! Per-cohort manifests are ingested through a [`ColumnMapping`], unified
//! into one [`DatasetManifest`] (first source wins on duplicate image ids),
//! and split into train / val / test with no patient shared between splits.

mod ingest;
mod persist;
mod record;
mod report;
mod split;

pub use ingest::{ingest_reader, ingest_source, unify, ColumnMapping, IngestOutcome, Rejection, Unified, UnifyConflict};
pub use persist::{read_manifest, write_manifest, ManifestPaths, ManifestSummary, MANIFEST_HEADER};
pub use record::{DatasetManifest, Finding, ImageRecord, Label, Sex, Source, Split, View};
pub use report::{
    demographic_summary, distribution_report, AgeBin, BinCount, ClassKey, DemographicSummary, DistributionReport,
    DistributionRow,
};
pub use split::{split_patient_level, TestTargets, DEFAULT_VAL_FRACTION};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("schema error in {file}: {msg}")]
    Schema { file: String, msg: String },
    #[error("conflicting labels for image {image_id}: {first:?} vs {second:?}")]
    LabelConflict { image_id: String, first: Label, second: Label },
    #[error("unsatisfiable test target for class {class}: need {target} images, {msg}")]
    Unsatisfiable { class: Finding, target: usize, msg: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("malformed manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io { path: path.into(), source }
    }
}
