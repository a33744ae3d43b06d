use super::load_spec;
use crate::output::{create_dir, guard_outputs, write_snapshot, write_text, CliError, CmdResult, RunLock, LOCK_NAME};
use crate::RunConfig;
use clap::{Args, ValueEnum};
use cxrscreen::archnet::Shape;
use cxrscreen::complexity::analyze;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ComplexityArgs {
    /// Built-in spec name or TOML spec file.
    #[arg(long, default_value = "cxr2-tiny")]
    pub spec: String,
    /// Input resolution as HxW, overriding the spec's.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Also write complexity.json and a config snapshot into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace existing outputs; `--overwrite=false` is the default.
    #[arg(long, action = clap::ArgAction::Set, num_args = 0..=1, require_equals = true, default_value_t = false, default_missing_value = "true")]
    pub overwrite: bool,
}

pub fn parse_input(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::usage(format!("--input must look like 480x480, got {s:?}"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

pub fn run(run: &RunConfig, args: &ComplexityArgs) -> CmdResult {
    let input = args.input.as_deref().map(parse_input).transpose()?;
    let mut spec = load_spec(&args.spec)?;
    if let Some((h, w)) = input {
        let channels = spec.input.channels;
        spec = spec.with_input(Shape::new(channels, h, w));
    }
    let report = analyze(&spec).map_err(|e| CliError::runtime("spec", e))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime("io", e))?;
    if let Some(dir) = &args.out {
        let outputs = [dir.join("complexity.json"), dir.join("complexity.toml")];
        guard_outputs(&outputs, args.overwrite)?;
        create_dir(dir)?;
        let _lock = RunLock::acquire(dir.join(LOCK_NAME))?;
        write_text(&outputs[0], &json)?;
        write_snapshot(&outputs[1], run, args)?;
    }
    match args.format {
        Format::Table => print!("{}", report.render_table()),
        Format::Json => println!("{json}"),
    }
    Ok(())
}
