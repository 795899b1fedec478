//! Run manifests: config snapshot, seeds and output digests written next to each output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::json;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Effective configuration; a valid `--config` for the same command.
    pub config: Value,
    pub catalog_version: String,
    /// Stage tag → derived seed.
    pub seeds: BTreeMap<String, u64>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// `out` with its extension replaced, e.g. `report.csv` → `report.md`.
pub fn sibling(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

/// Outputs are write-once: refuse existing paths unless `force`.
pub fn ensure_writable(paths: &[PathBuf], force: bool) -> Result<()> {
    for p in paths {
        if p.exists() && !force {
            return Err(Error::invalid(format!(
                "output {} already exists (pass --force to overwrite)",
                p.display()
            )));
        }
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !dir.is_dir() {
                return Err(Error::invalid(format!("output directory {} does not exist", dir.display())));
            }
        }
    }
    Ok(())
}

pub fn ensure_readable(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Error::invalid(format!("input {} does not exist", p.display())));
        }
    }
    Ok(())
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Check that every recorded output still has its recorded digest.
    pub fn verify_outputs(&self) -> Result<()> {
        for f in &self.outputs {
            let now = sha256_file(Path::new(&f.path))?;
            if now != f.sha256 {
                return Err(Error::Format(format!("{} does not match its recorded digest", f.path)));
            }
        }
        Ok(())
    }
}
