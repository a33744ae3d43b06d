use super::train::preprocess_for;
use crate::output::{create_dir, guard_outputs, io_err, write_snapshot, write_text, CliError, CmdResult, RunLock, LOCK_NAME};
use crate::RunConfig;
use clap::Args;
use cxrscreen::archnet::load_checkpoint;
use cxrscreen::factorscope::{identify_critical_factors, render_overlay, ExplainError, FactorConfig, DEFAULT_CELLS, DEFAULT_DROP};
use cxrscreen::pixelpipe::load_preprocessed;
use cxrscreen::ImageBuffer;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExplainArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// PNG/JPEG (preprocessed on load) or a `.cxrt` tensor.
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CELLS)]
    pub cells: usize,
    #[arg(long, default_value_t = DEFAULT_DROP)]
    pub drop_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Replace existing outputs; `--overwrite=false` is the default.
    #[arg(long, action = clap::ArgAction::Set, num_args = 0..=1, require_equals = true, default_value_t = false, default_missing_value = "true")]
    pub overwrite: bool,
}

fn explain_err(e: ExplainError) -> CliError {
    let kind = match &e {
        ExplainError::Argument(_) => "usage",
        ExplainError::NonFinite => "numeric",
        ExplainError::Model(_) => "model",
        ExplainError::Write { .. } => "io",
    };
    CliError { kind, code: if kind == "usage" { 2 } else { 1 }, msg: e.to_string() }
}

pub fn run(run: &RunConfig, args: &ExplainArgs) -> CmdResult {
    if args.cells == 0 {
        return Err(CliError::usage("--cells must be positive"));
    }
    if !(args.drop_threshold > 0.0 && args.drop_threshold <= 1.0) {
        return Err(CliError::usage(format!("--drop-threshold must be in (0, 1], got {}", args.drop_threshold)));
    }
    let outputs = ["mask.txt", "mask.json", "overlay.png", "explain.toml"].map(|f| args.out_dir.join(f));
    guard_outputs(&outputs, args.overwrite)?;

    let model = load_checkpoint(&args.checkpoint).map_err(|e| CliError::runtime("model", e))?;
    let (h, w) = model.input_shape().spatial();
    let img = if args.image.extension().is_some_and(|e| e == "cxrt") {
        let f = std::fs::File::open(&args.image).map_err(|e| io_err(&args.image, e))?;
        ImageBuffer::read_tensor(std::io::BufReader::new(f)).map_err(|e| CliError::runtime("data", e))?
    } else {
        load_preprocessed(&args.image, &preprocess_for((h, w))?).map_err(|e| CliError::runtime("data", e))?
    };
    if (img.height(), img.width()) != (h, w) {
        return Err(CliError::runtime(
            "data",
            format!("image is {}x{}, model expects {h}x{w}", img.height(), img.width()),
        ));
    }
    let cfg = FactorConfig { cells_per_side: args.cells, drop_threshold: args.drop_threshold, class_threshold: args.threshold };
    let mask = identify_critical_factors(&model, &img, &cfg).map_err(explain_err)?;

    create_dir(&args.out_dir)?;
    let _lock = RunLock::acquire(args.out_dir.join(LOCK_NAME))?;
    write_text(&outputs[0], &mask.to_text())?;
    write_text(&outputs[1], &serde_json::to_string_pretty(&mask).map_err(|e| CliError::runtime("io", e))?)?;
    render_overlay(&img, &mask, &outputs[2]).map_err(explain_err)?;
    write_snapshot(&outputs[3], run, args)?;
    print!("{}", mask.to_text());
    Ok(())
}
