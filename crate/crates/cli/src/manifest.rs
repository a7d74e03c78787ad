//! Run manifests: the fully resolved configuration of an `embed` run, the
//! digests of what it read and wrote, and per-stage wall times.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SvdSettings {
    pub oversample: usize,
    pub power_iters: usize,
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResolvedConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub directed: bool,
    pub mode: String,
    pub dim: usize,
    pub walk_length: usize,
    /// `fixed` or `auto` (estimated diameter).
    pub walk_length_rule: String,
    pub trials: usize,
    pub splits: usize,
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    /// `fixed` or `auto` (skewness search).
    pub gamma_rule: String,
    pub clip_c: f64,
    pub seed: u64,
    pub dangling: String,
    pub closed_cap: usize,
    pub svd: SvdSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ResolvedConfig,
    pub graph: GraphSummary,
    /// sha256 of each file read, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of each file written, keyed by path.
    pub outputs: BTreeMap<String, String>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Sibling path with `suffix` appended to the file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Writes through a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = with_suffix(path, ".tmp");
    write(&tmp)?;
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} to {}", tmp.display(), path.display()))
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        write_atomic(path, |tmp| {
            fs::write(tmp, text + "\n").with_context(|| format!("cannot write {}", tmp.display()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("{} is not a valid run manifest", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc");
        fs::write(&path, "abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, |tmp| Ok(fs::write(tmp, "x")?)).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "x");
        assert!(!with_suffix(&path, ".tmp").exists());
    }
}
