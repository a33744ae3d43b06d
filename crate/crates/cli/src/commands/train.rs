use super::load_spec;
use crate::output::{create_dir, write_snapshot, write_text, CliError, CmdResult, RunLock, LOCK_NAME};
use crate::RunConfig;
use clap::Args;
use cxrscreen::complexity::analyze;
use cxrscreen::dataman::{read_manifest, ManifestPaths, ManifestSummary};
use cxrscreen::pixelpipe::{AugmentConfig, PreprocessConfig, DEFAULT_CROP_FRACTION};
use cxrscreen::trainer::{train, FileImageSource, TrainConfig, TrainError};
use cxrscreen::Model;
use log::info;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Built-in spec name or TOML spec file.
    #[arg(long, default_value = "cxr2-tiny")]
    pub spec: String,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    /// Positives per batch; half the batch when omitted.
    #[arg(long)]
    pub positives_per_batch: Option<usize>,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub no_augment: bool,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace existing outputs; `--overwrite=false` is the default.
    #[arg(long, action = clap::ArgAction::Set, num_args = 0..=1, require_equals = true, default_value_t = false, default_missing_value = "true")]
    pub overwrite: bool,
}

pub fn data_root(run: &RunConfig, manifest: &Path) -> PathBuf {
    run.data_root.clone().unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default())
}

pub fn preprocess_for(model_side: (usize, usize)) -> Result<PreprocessConfig, CliError> {
    if model_side.0 != model_side.1 {
        return Err(CliError::runtime("spec", format!("model input {}x{} is not square", model_side.0, model_side.1)));
    }
    Ok(PreprocessConfig { crop_fraction: DEFAULT_CROP_FRACTION, side: model_side.0 })
}

fn train_err(e: TrainError) -> CliError {
    let kind = match &e {
        TrainError::Config(_) => "config",
        TrainError::Data { .. } => "data",
        TrainError::NonFiniteLoss { .. } => "numeric",
        TrainError::Model(_) => "model",
        TrainError::Io { .. } => "io",
    };
    CliError::runtime(kind, e)
}

fn dir_has_entries(dir: &Path) -> bool {
    std::fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false)
}

pub fn run(run: &RunConfig, args: &TrainArgs) -> CmdResult {
    let cfg = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch_size,
        positives_per_batch: args.positives_per_batch,
        epochs: args.epochs,
        patience: args.patience,
        seed: run.seed,
        max_steps: args.max_steps,
        augment: if args.no_augment { AugmentConfig::disabled() } else { AugmentConfig::default() },
        ..TrainConfig::default()
    };
    cfg.validate().map_err(|e| CliError::usage(e))?;
    let spec = load_spec(&args.spec)?;
    if spec.input.channels != 1 {
        return Err(CliError::runtime("spec", "model input must have one channel"));
    }
    let preprocess = preprocess_for(spec.input.spatial())?;
    let manifest = read_manifest(&args.manifest).map_err(|e| CliError::runtime("data", e))?;
    if args.out.exists() && dir_has_entries(&args.out) && !args.overwrite {
        return Err(CliError::runtime("exists", format!("{} is not empty; pass --overwrite to reuse it", args.out.display())));
    }

    create_dir(&args.out)?;
    let _lock = RunLock::acquire(args.out.join(LOCK_NAME))?;
    write_snapshot(&args.out.join("run.toml"), run, args)?;
    write_text(&args.out.join("spec.toml"), &spec.to_toml())?;
    let summary_path = ManifestPaths::for_manifest(&args.manifest).summary;
    let dataset = match std::fs::read_to_string(&summary_path) {
        Ok(text) => text,
        Err(_) => toml::to_string(&ManifestSummary::of(&manifest, None, None)).map_err(|e| CliError::runtime("io", e))?,
    };
    write_text(&args.out.join("dataset.toml"), &dataset)?;
    let report = analyze(&spec).map_err(|e| CliError::runtime("spec", e))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime("io", e))?;
    write_text(&args.out.join("complexity.json"), &json)?;

    let model = Model::new(spec, run.seed).map_err(|e| CliError::runtime("spec", e))?;
    info!("model {}: {} parameters, {} MACs", model.spec().name, report.total_params, report.total_macs);
    let source = FileImageSource { root: data_root(run, &args.manifest), preprocess };
    let (_, history) = train(model, &manifest, &source, &cfg, Some(&args.out)).map_err(train_err)?;
    let best = history.best().ok_or_else(|| CliError::runtime("runtime", "no epoch completed"))?;
    println!(
        "best epoch {} of {}: val accuracy {:.4}; {} steps; checkpoint {}",
        history.best_epoch,
        history.epochs.len(),
        best.val_accuracy,
        history.total_steps,
        args.out.join("best.ckpt").display()
    );
    Ok(())
}
