//! `cxrscreen` command suite.

mod commands;
mod output;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub use output::{CliError, RunLock};

#[derive(Debug, Parser)]
#[command(name = "cxrscreen", version, about = "Chest X-ray screening pipeline", arg_required_else_help = true)]
pub struct Cli {
    /// Global seed for splitting, initialization, batching and augmentation.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Root directory that manifest file paths are relative to.
    #[arg(long, global = true)]
    pub data_root: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    pub log_level: LogLevel,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest per-source manifests, unify, split by patient and write the benchmark manifest.
    PrepareData(commands::prepare::PrepareArgs),
    /// Train a model with class-rebalanced batches and early stopping.
    Train(commands::train::TrainArgs),
    /// Compute sensitivity / PPV / accuracy from a checkpoint or a prediction file.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Find the image regions that drive a prediction and render an overlay.
    Explain(commands::explain::ExplainArgs),
    /// Count parameters and multiply-accumulates of a spec.
    Complexity(commands::complexity::ComplexityArgs),
    /// Summarize a run directory.
    Report(commands::report::ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PrepareData(_) => "prepare-data",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Explain(_) => "explain",
            Command::Complexity(_) => "complexity",
            Command::Report(_) => "report",
        }
    }
}

/// Settings shared by every command, recorded in each config snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub data_root: Option<PathBuf>,
    pub log_level: LogLevel,
}

fn init_logging(level: LogLevel) {
    let _ = env_logger::Builder::new()
        .filter_level(level.filter())
        .format(|buf, record| {
            writeln!(buf, "level={} target={} msg={:?}", record.level(), record.target(), record.args().to_string())
        })
        .try_init();
    log::set_max_level(level.filter());
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status: 0 success, 1 runtime failure, 2 usage error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.log_level);
    let run = RunConfig {
        command: cli.command.name().to_string(),
        seed: cli.seed,
        data_root: cli.data_root.clone(),
        log_level: cli.log_level,
    };
    let result = match &cli.command {
        Command::PrepareData(a) => commands::prepare::run(&run, a),
        Command::Train(a) => commands::train::run(&run, a),
        Command::Evaluate(a) => commands::evaluate::run(&run, a),
        Command::Explain(a) => commands::explain::run(&run, a),
        Command::Complexity(a) => commands::complexity::run(&run, a),
        Command::Report(a) => commands::report::run(&run, a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.code
        }
    }
}
