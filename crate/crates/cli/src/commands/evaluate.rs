use super::train::{data_root, preprocess_for};
use crate::output::{create_dir, guard_outputs, io_err, write_snapshot, write_text, CliError, CmdResult, RunLock, LOCK_NAME};
use crate::RunConfig;
use clap::{Args, ValueEnum};
use cxrscreen::archnet::load_checkpoint;
use cxrscreen::dataman::{read_manifest, Split};
use cxrscreen::metrics::{confusion, metrics_with_threshold, render_report, MetricsReport, ReportStyle};
use cxrscreen::trainer::{check_constraints, predict_split, ConstraintSpec, ConstraintVerdict, FileImageSource};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long, requires = "manifest", conflicts_with = "predictions")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    pub manifest: Option<PathBuf>,
    /// Score an existing `image_id,label,probability` CSV instead of running a model.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.95)]
    pub min_sensitivity: f64,
    #[arg(long, default_value_t = 0.95)]
    pub min_ppv: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Directory for metrics.json, predictions.csv and the verdict.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace existing outputs; `--overwrite=false` is the default.
    #[arg(long, action = clap::ArgAction::Set, num_args = 0..=1, require_equals = true, default_value_t = false, default_missing_value = "true")]
    pub overwrite: bool,
}

/// One scored image, the row format of `predictions.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub image_id: String,
    pub label: u8,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: MetricsReport,
    pub verdict: ConstraintVerdict,
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for (i, row) in rdr.deserialize::<PredictionRow>().enumerate() {
        let row = row.map_err(|e| CliError::runtime("data", format!("{} row {}: {e}", path.display(), i + 2)))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> CmdResult {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn score(rows: &[PredictionRow], threshold: f64, spec: &ConstraintSpec) -> Result<Evaluation, CliError> {
    let probs: Vec<f64> = rows.iter().map(|r| r.probability).collect();
    let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
    let cm = confusion(&probs, &labels, threshold).map_err(|e| CliError::runtime("data", e))?;
    let metrics = metrics_with_threshold(cm, threshold);
    Ok(Evaluation { metrics, verdict: check_constraints(&metrics, spec) })
}

pub fn run(run: &RunConfig, args: &EvaluateArgs) -> CmdResult {
    if args.predictions.is_none() && args.checkpoint.is_none() {
        return Err(CliError::usage("pass either --predictions or --checkpoint with --manifest"));
    }
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::usage(format!("--threshold must be in [0, 1], got {}", args.threshold)));
    }
    let spec = ConstraintSpec { min_sensitivity: args.min_sensitivity, min_ppv: args.min_ppv };
    spec.validate().map_err(CliError::usage)?;
    let outputs = args.out.as_ref().map(|d| ["metrics.json", "predictions.csv", "evaluate.toml"].map(|f| d.join(f)));
    if let Some(o) = &outputs {
        guard_outputs(o, args.overwrite)?;
    }

    let rows = match (&args.predictions, &args.checkpoint, &args.manifest) {
        (Some(p), _, _) => read_predictions(p)?,
        (None, Some(ckpt), Some(manifest_path)) => {
            let model = load_checkpoint(ckpt).map_err(|e| CliError::runtime("model", e))?;
            let manifest = read_manifest(manifest_path).map_err(|e| CliError::runtime("data", e))?;
            let preprocess = preprocess_for(model.input_shape().spatial())?;
            let source = FileImageSource { root: data_root(run, manifest_path), preprocess };
            let (ids, probs, labels) =
                predict_split(&model, &manifest, args.split.into(), &source).map_err(|e| CliError::runtime("data", e))?;
            ids.into_iter()
                .zip(probs)
                .zip(labels)
                .map(|((image_id, probability), label)| PredictionRow { image_id, label, probability })
                .collect()
        }
        _ => return Err(CliError::usage("--checkpoint needs --manifest")),
    };
    if rows.is_empty() {
        return Err(CliError::runtime("data", "no images to evaluate"));
    }
    let eval = score(&rows, args.threshold, &spec)?;

    if let (Some(dir), Some(o)) = (&args.out, &outputs) {
        create_dir(dir)?;
        let _lock = RunLock::acquire(dir.join(LOCK_NAME))?;
        let json = serde_json::to_string_pretty(&eval).map_err(|e| CliError::runtime("io", e))?;
        write_text(&o[0], &json)?;
        write_predictions(&o[1], &rows)?;
        write_snapshot(&o[2], run, args)?;
    }
    match args.format {
        Format::Table => {
            print!("{}", render_report(&eval.metrics, ReportStyle::Table));
            println!("constraints: {}", eval.verdict);
        }
        Format::Json => println!("{}", serde_json::to_string_pretty(&eval).map_err(|e| CliError::runtime("io", e))?),
    }
    Ok(())
}
