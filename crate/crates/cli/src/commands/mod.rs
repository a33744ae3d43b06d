pub mod complexity;
pub mod evaluate;
pub mod explain;
pub mod prepare;
pub mod report;
pub mod train;

use crate::output::CliError;
use cxrscreen::ArchSpec;
use std::path::Path;

/// A built-in spec name or a path to a TOML spec file.
pub fn load_spec(name: &str) -> Result<ArchSpec, CliError> {
    if let Some(s) = ArchSpec::builtin(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(CliError::usage(format!("unknown spec {name:?}: not a built-in name (cxr2-tiny, prpe-toy) or an existing file")));
    }
    let text = std::fs::read_to_string(path).map_err(|e| crate::output::io_err(path, e))?;
    let spec = ArchSpec::from_toml(&text).map_err(|e| CliError::runtime("spec", e))?;
    spec.validate().map_err(|e| CliError::runtime("spec", e))?;
    Ok(spec)
}
