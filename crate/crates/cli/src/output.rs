use serde::Serialize;
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

/// A failure reported as one machine-parseable line.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub msg: String,
    pub code: i32,
}

impl CliError {
    pub fn runtime(kind: &'static str, msg: impl std::fmt::Display) -> Self {
        CliError { kind, msg: msg.to_string(), code: 1 }
    }

    pub fn usage(msg: impl std::fmt::Display) -> Self {
        CliError { kind: "usage", msg: msg.to_string(), code: 2 }
    }

    /// `error kind=<kind> code=<n> msg="<json-escaped message>"`
    pub fn line(&self) -> String {
        format!("error kind={} code={} msg={}", self.kind, self.code, serde_json::to_string(&self.msg).unwrap_or_default())
    }
}

pub type CmdResult = Result<(), CliError>;

pub fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::runtime("io", format!("{}: {e}", path.display()))
}

/// Refuses to replace any of `paths` unless `overwrite` is set.
pub fn guard_outputs(paths: &[PathBuf], overwrite: bool) -> CmdResult {
    if overwrite {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(CliError::runtime("exists", format!("{} exists; pass --overwrite to replace it", p.display()))),
        None => Ok(()),
    }
}

/// Exclusive lock held for the lifetime of the value.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
    _file: File,
}

impl RunLock {
    pub fn acquire(path: PathBuf) -> Result<Self, CliError> {
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => Ok(RunLock { path, _file: f }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::runtime("locked", format!("{} is held by another run", path.display())))
            }
            Err(e) => Err(io_err(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub const LOCK_NAME: &str = ".cxrscreen.lock";

pub fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct Snapshot<'a, A: Serialize> {
    run: &'a crate::RunConfig,
    args: &'a A,
}

/// Writes the run settings and command arguments as TOML.
pub fn write_snapshot<A: Serialize>(path: &Path, run: &crate::RunConfig, args: &A) -> CmdResult {
    let text = toml::to_string(&Snapshot { run, args }).map_err(|e| CliError::runtime("config", e))?;
    write_text(path, &text)
}

pub fn create_dir(path: &Path) -> CmdResult {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}
