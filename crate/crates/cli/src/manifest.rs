//! Run manifests: everything needed to reproduce a run byte for byte, plus
//! wall-clock timings (the one field exempt from reproducibility).

use mildns_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

fn io_err(msg: String) -> Error {
    Error::Io(std::io::Error::other(msg))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    /// Resolved config embedded verbatim, so the manifest alone re-executes.
    pub config_toml: String,
    pub seed: u64,
    pub grid: Vec<usize>,
    pub outputs: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
}

pub fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl Manifest {
    pub fn new(config_toml: String, seed: u64, grid: Vec<usize>) -> Self {
        Manifest {
            tool: "mildns".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: sha256_hex(&config_toml),
            config_toml,
            seed,
            grid,
            outputs: Vec::new(),
            timings_s: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("manifest parse {}: {e}", path.display())))
    }
}

/// Write via a sibling temp file and rename, so partial files never appear
/// under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(format!("mkdir {}: {e}", dir.display())))?;
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, bytes).map_err(|e| io_err(format!("write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| io_err(format!("rename {}: {e}", path.display())))?;
    Ok(())
}

/// Collect `manifest.json` under `dir` (directly or one level down).
pub fn collect_manifests(dir: &Path) -> Vec<(PathBuf, Manifest)> {
    let mut found = Vec::new();
    let mut try_push = |p: PathBuf| {
        if p.is_file() {
            if let Ok(m) = Manifest::from_path(&p) {
                found.push((p, m));
            }
        }
    };
    try_push(dir.join("manifest.json"));
    if let Ok(entries) = fs::read_dir(dir) {
        let mut subdirs: Vec<PathBuf> = entries
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        for sub in subdirs {
            try_push(sub.join("manifest.json"));
        }
    }
    found
}

/// Human-readable table of every run bundle found under `dir`.
pub fn render_report(dir: &Path) -> Result<String> {
    let found = collect_manifests(dir);
    let mut out = String::new();
    if found.is_empty() {
        out.push_str(&format!("no manifests under {}\n", dir.display()));
        return Ok(out);
    }
    out.push_str("run  grid  seed  config  files  march_s\n");
    for (path, man) in &found {
        let run = path
            .parent()
            .and_then(|p| p.strip_prefix(dir).ok())
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| ".".into());
        let run = if run.is_empty() { ".".to_string() } else { run };
        let grid = man
            .grid
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let march = man.timings_s.get("march").copied().unwrap_or(0.0);
        out.push_str(&format!(
            "{run}  {grid}  {seed}  {sha}  {files}  {march:.2}\n",
            seed = man.seed,
            sha = &man.config_sha256[..12],
            files = man.outputs.len(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_known_vector() {
        // sha256("abc")
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_roundtrips_through_json() {
        let mut m = Manifest::new("[grid]\nshape = [8, 8]\n".into(), 7, vec![8, 8]);
        m.outputs.push("series.csv".into());
        m.timings_s.insert("total".into(), 1.25);
        let text = m.to_json().unwrap();
        let back: Manifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back.config_sha256, m.config_sha256);
        assert_eq!(back.outputs, m.outputs);
    }
}
