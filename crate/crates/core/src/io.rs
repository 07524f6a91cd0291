//! Fixed-format number output and file writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 17 significant digits; round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// 12 significant digits, for terminal summaries.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Writes `contents` to `dir/name`. The directory must already exist.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<()> {
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "output directory {} does not exist",
            dir.display()
        )));
    }
    fs::write(dir.join(name), contents)?;
    Ok(())
}
