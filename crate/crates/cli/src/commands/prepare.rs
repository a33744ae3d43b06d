use crate::output::{create_dir, guard_outputs, io_err, write_snapshot, write_text, CliError, CmdResult, RunLock};
use crate::RunConfig;
use clap::Args;
use cxrscreen::dataman::{
    demographic_summary, distribution_report, ingest_source, split_patient_level, unify, write_manifest, ColumnMapping,
    ManifestPaths, ManifestSummary, Source, TestTargets, DEFAULT_VAL_FRACTION,
};
use log::{info, warn};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Args, Serialize)]
pub struct PrepareArgs {
    /// Directory of per-source metadata files (`<source>.csv` or `.tsv`), each
    /// with an optional `<source>.toml` column mapping.
    #[arg(long)]
    pub sources: PathBuf,
    /// Output manifest CSV; sidecars are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub test_pos_images: usize,
    #[arg(long, default_value_t = 200)]
    pub test_neg_images: usize,
    #[arg(long, default_value_t = DEFAULT_VAL_FRACTION)]
    pub val_fraction: f64,
    /// Replace existing outputs; `--overwrite=false` is the default.
    #[arg(long, action = clap::ArgAction::Set, num_args = 0..=1, require_equals = true, default_value_t = false, default_missing_value = "true")]
    pub overwrite: bool,
}

struct SourceFile {
    source: Source,
    path: PathBuf,
    mapping: ColumnMapping,
}

fn discover(dir: &Path) -> Result<Vec<SourceFile>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if ext != "csv" && ext != "tsv" {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
        let mapping_path = path.with_extension("toml");
        let mut mapping = if mapping_path.exists() {
            let text = std::fs::read_to_string(&mapping_path).map_err(|e| io_err(&mapping_path, e))?;
            toml::from_str(&text).map_err(|e| CliError::runtime("config", format!("{}: {e}", mapping_path.display())))?
        } else {
            ColumnMapping::default()
        };
        if ext == "tsv" && !mapping_path.exists() {
            mapping.delimiter = '\t';
        }
        files.push(SourceFile { source: Source::from(stem), path, mapping });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    if files.is_empty() {
        return Err(CliError::runtime("data", format!("no .csv or .tsv source files in {}", dir.display())));
    }
    Ok(files)
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "manifest".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

pub fn run(run: &RunConfig, args: &PrepareArgs) -> CmdResult {
    if !(0.0..1.0).contains(&args.val_fraction) {
        return Err(CliError::usage(format!("--val-fraction must be in [0, 1), got {}", args.val_fraction)));
    }
    if !args.sources.is_dir() {
        return Err(CliError::usage(format!("--sources {} is not a directory", args.sources.display())));
    }
    let paths = ManifestPaths::for_manifest(&args.out);
    let extra = ["rejections.csv", "distribution.csv", "demographics.txt", "config.toml"].map(|s| sidecar(&args.out, s));
    let mut outputs = vec![paths.manifest.clone(), paths.splits.clone(), paths.summary.clone()];
    outputs.extend(extra.iter().cloned());
    guard_outputs(&outputs, args.overwrite)?;

    let files = discover(&args.sources)?;
    let mut per_source = Vec::new();
    let mut rejections = csv::Writer::from_writer(Vec::new());
    rejections.write_record(["source", "line", "image_id", "reason"]).map_err(|e| CliError::runtime("io", e))?;
    for f in &files {
        let outcome = ingest_source(&f.path, f.source.clone(), &f.mapping).map_err(|e| CliError::runtime("data", e))?;
        info!("source {}: {} records, {} rejected", f.source, outcome.records.len(), outcome.rejections.len());
        for r in &outcome.rejections {
            let line = r.line.to_string();
            rejections
                .write_record([f.source.as_str(), line.as_str(), r.image_id.as_deref().unwrap_or(""), r.reason.as_str()])
                .map_err(|e| CliError::runtime("io", e))?;
        }
        per_source.push(outcome.records);
    }
    let unified = unify(per_source).map_err(|e| CliError::runtime("data", e))?;
    for c in &unified.conflicts {
        warn!("duplicate {} kept from {}, dropped from {}", c.image_id, c.kept, c.dropped);
    }
    let targets = TestTargets::from_label_targets(args.test_pos_images, args.test_neg_images);
    let manifest = split_patient_level(&unified.manifest, &targets, args.val_fraction, run.seed)
        .map_err(|e| CliError::runtime("data", e))?;

    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let _lock = RunLock::acquire(sidecar(&args.out, "lock"))?;
    let summary = ManifestSummary::of(&manifest, Some(run.seed), Some(args.val_fraction));
    write_manifest(&manifest, &paths, &summary).map_err(|e| CliError::runtime("io", e))?;
    let rej = rejections.into_inner().map_err(|e| CliError::runtime("io", e.to_string()))?;
    std::fs::write(&extra[0], rej).map_err(|e| io_err(&extra[0], e))?;
    let dist = distribution_report(&manifest);
    write_text(&extra[1], &dist.to_csv())?;
    write_text(&extra[2], &demographic_summary(&manifest).render_table())?;
    write_snapshot(&extra[3], run, args)?;

    println!(
        "manifest {}: {} images, {} patients, train/val/test images {}/{}/{}",
        args.out.display(),
        summary.records,
        summary.patients,
        summary.split_images["train"],
        summary.split_images["val"],
        summary.split_images["test"],
    );
    print!("{}", dist.to_csv());
    Ok(())
}
