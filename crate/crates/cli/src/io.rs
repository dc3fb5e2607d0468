use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mixpack_core::profile::DspProfile;

/// Input that could not be read or parsed; exit 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<mixpack_core::Error>() {
            return if e.is_schema() { 2 } else { 1 };
        }
    }
    1
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Usage(format!("cannot read {}: {e}", path.display())).into())
}

/// Write `text` to `out`, or to stdout without one.
pub fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// A built-in profile name or a path to a profile JSON file.
pub fn profile(spec: &str) -> Result<DspProfile> {
    if let Some(p) = DspProfile::builtin(spec) {
        return Ok(p);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Usage(format!("`{spec}` is neither a built-in profile nor a file")).into());
    }
    let p: DspProfile =
        serde_json::from_str(&read(path)?).map_err(|e| Usage(format!("profile {}: {e}", path.display())))?;
    p.validate()?;
    Ok(p)
}
