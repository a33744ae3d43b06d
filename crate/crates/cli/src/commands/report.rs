use super::evaluate::{read_predictions, score, Evaluation};
use crate::output::{io_err, CliError, CmdResult};
use crate::RunConfig;
use clap::{Args, ValueEnum};
use cxrscreen::complexity::{analyze, ComplexityReport};
use cxrscreen::dataman::ManifestSummary;
use cxrscreen::metrics::metrics_with_threshold;
use cxrscreen::trainer::{check_constraints, sha256_hex, ConstraintSpec, EpochRecord};
use cxrscreen::ArchSpec;
use log::warn;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

/// A report section: either recomputed values or the reason they are absent.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Section<T> {
    Ok { value: T },
    Missing { reason: String },
}

impl<T> From<Result<T, String>> for Section<T> {
    fn from(r: Result<T, String>) -> Self {
        match r {
            Ok(value) => Section::Ok { value },
            Err(reason) => Section::Missing { reason },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub total_steps: usize,
    pub final_train_loss: f64,
    pub best_checkpoint_present: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub name: String,
    pub input: String,
    pub total_params: u64,
    pub total_macs: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub run_dir: PathBuf,
    pub warnings: Vec<String>,
    pub model: Section<ModelSummary>,
    pub dataset: Section<ManifestSummary>,
    pub training: Section<TrainingSummary>,
    pub evaluation: Section<Evaluation>,
}

fn read(dir: &Path, name: &str) -> Result<String, String> {
    let p = dir.join(name);
    std::fs::read_to_string(&p).map_err(|e| format!("{name}: {e}"))
}

fn model_section(dir: &Path, warnings: &mut Vec<String>) -> Result<ModelSummary, String> {
    let spec = ArchSpec::from_toml(&read(dir, "spec.toml")?).map_err(|e| format!("spec.toml: {e}"))?;
    let report = analyze(&spec).map_err(|e| format!("spec.toml: {e}"))?;
    if let Ok(text) = read(dir, "complexity.json") {
        match serde_json::from_str::<ComplexityReport>(&text) {
            Ok(stored) if stored != report => warnings.push("complexity.json disagrees with spec.toml".into()),
            Err(e) => warnings.push(format!("complexity.json unreadable: {e}")),
            _ => {}
        }
    }
    let (h, w) = spec.input.spatial();
    Ok(ModelSummary {
        name: spec.name,
        input: format!("{}x{h}x{w}", spec.input.channels),
        total_params: report.total_params,
        total_macs: report.total_macs,
    })
}

fn training_section(dir: &Path, warnings: &mut Vec<String>) -> Result<TrainingSummary, String> {
    let raw = read(dir, "history.jsonl")?;
    match read(dir, "history.sha256") {
        Ok(sum) => {
            let expected = sum.split_whitespace().next().unwrap_or("");
            if expected != sha256_hex(raw.as_bytes()) {
                warnings.push("history.jsonl checksum mismatch; the log was modified after training".into());
            }
        }
        Err(_) => warnings.push("history.sha256 missing; history integrity not verified".into()),
    }
    let mut epochs = Vec::new();
    for (i, line) in raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: EpochRecord = serde_json::from_str(line).map_err(|e| format!("history.jsonl line {}: {e}", i + 1))?;
        epochs.push(rec);
    }
    let last = epochs.last().ok_or("history.jsonl has no epochs")?;
    // earliest epoch wins ties
    let best = epochs.iter().fold(&epochs[0], |b, e| if e.val_accuracy > b.val_accuracy { e } else { b });
    Ok(TrainingSummary {
        epochs: epochs.len(),
        best_epoch: best.epoch,
        best_val_accuracy: best.val_accuracy,
        total_steps: epochs.iter().map(|e| e.steps).sum(),
        final_train_loss: last.train_loss,
        best_checkpoint_present: dir.join("best.ckpt").exists(),
    })
}

fn evaluation_section(dir: &Path, warnings: &mut Vec<String>) -> Result<Evaluation, String> {
    let stored: Evaluation =
        serde_json::from_str(&read(dir, "metrics.json")?).map_err(|e| format!("metrics.json: {e}"))?;
    let minimum = |name: &str, default: f64| {
        stored.verdict.checks.iter().find(|c| c.name == name).map_or(default, |c| c.minimum)
    };
    let spec = ConstraintSpec { min_sensitivity: minimum("sensitivity", 0.95), min_ppv: minimum("ppv", 0.95) };
    let threshold = stored.metrics.threshold;
    let eval = match read_predictions(&dir.join("predictions.csv")) {
        Ok(rows) => {
            let eval = score(&rows, threshold, &spec).map_err(|e| format!("predictions.csv: {}", e.msg))?;
            if eval.metrics.matrix != stored.metrics.matrix {
                warnings.push("metrics.json confusion matrix disagrees with predictions.csv".into());
            }
            eval
        }
        Err(_) => {
            warnings.push("predictions.csv missing; metrics recomputed from the stored confusion matrix".into());
            let metrics = metrics_with_threshold(stored.metrics.matrix, threshold);
            Evaluation { metrics, verdict: check_constraints(&metrics, &spec) }
        }
    };
    if eval.verdict.passed != stored.verdict.passed {
        warnings.push("stored constraint verdict disagrees with recomputed metrics".into());
    }
    Ok(eval)
}

pub fn build_report(dir: &Path) -> RunReport {
    let mut warnings = Vec::new();
    let model = model_section(dir, &mut warnings).into();
    let dataset = read(dir, "dataset.toml")
        .and_then(|t| toml::from_str::<ManifestSummary>(&t).map_err(|e| format!("dataset.toml: {e}")))
        .into();
    let training = training_section(dir, &mut warnings).into();
    let evaluation = evaluation_section(dir, &mut warnings).into();
    RunReport { run_dir: dir.to_path_buf(), warnings, model, dataset, training, evaluation }
}

fn section<T>(out: &mut String, title: &str, s: &Section<T>, body: impl Fn(&T, &mut String)) {
    let _ = writeln!(out, "[{title}]");
    match s {
        Section::Ok { value } => body(value, out),
        Section::Missing { reason } => {
            let _ = writeln!(out, "missing: {reason}");
        }
    }
}

pub fn render_text(r: &RunReport) -> String {
    let mut out = format!("run {}\n", r.run_dir.display());
    for w in &r.warnings {
        let _ = writeln!(out, "WARNING: {w}");
    }
    section(&mut out, "model", &r.model, |m, o| {
        let _ = writeln!(o, "{} input {}: {} params, {} MACs", m.name, m.input, m.total_params, m.total_macs);
    });
    section(&mut out, "dataset", &r.dataset, |d, o| {
        let _ = writeln!(o, "{} images, {} patients", d.records, d.patients);
        for (split, n) in &d.split_images {
            let _ = writeln!(o, "{split}: {n} images, {} patients", d.split_patients.get(split).copied().unwrap_or(0));
        }
    });
    section(&mut out, "training", &r.training, |t, o| {
        let _ = writeln!(
            o,
            "{} epochs, {} steps; best epoch {} val accuracy {:.4}; final train loss {:.5}; best.ckpt {}",
            t.epochs,
            t.total_steps,
            t.best_epoch,
            t.best_val_accuracy,
            t.final_train_loss,
            if t.best_checkpoint_present { "present" } else { "missing" }
        );
    });
    section(&mut out, "evaluation", &r.evaluation, |e, o| {
        let m = &e.metrics.matrix;
        let _ = writeln!(o, "Sensitivity (%) / PPV (%) / Accuracy (%): {}", e.metrics.summary_line());
        let _ = writeln!(o, "tn {} fp {} fn {} tp {} at threshold {}", m.tn, m.fp, m.fn_, m.tp, e.metrics.threshold);
        let _ = writeln!(o, "constraints: {}", e.verdict);
    });
    out
}

pub fn run(_run: &RunConfig, args: &ReportArgs) -> CmdResult {
    if !args.run_dir.is_dir() {
        return Err(io_err(&args.run_dir, "not a directory"));
    }
    let report = build_report(&args.run_dir);
    for w in &report.warnings {
        warn!("{w}");
    }
    match args.format {
        Format::Text => print!("{}", render_text(&report)),
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime("io", e))?),
    }
    Ok(())
}
