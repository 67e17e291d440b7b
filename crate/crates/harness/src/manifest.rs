//! `manifest.json`: an index of every artifact under an output directory
//! with its size and SHA-256, so reruns can be compared file by file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub artifacts: Vec<Artifact>,
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| HarnessError::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Every file under `root` except the manifest itself, in path order.
pub fn scan(root: &Path) -> Result<Vec<Artifact>> {
    let mut files = Vec::new();
    walk(root, &mut files)?;
    let mut out = Vec::new();
    for p in files {
        let rel = p.strip_prefix(root).expect("walked under root");
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        if rel == MANIFEST_NAME {
            continue;
        }
        let bytes = fs::read(&p).map_err(|e| HarnessError::io(&p, e))?;
        out.push(Artifact { path: rel, bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

pub fn write_manifest(root: &Path, command: &str, seed: u64, config: &impl Serialize) -> Result<RunManifest> {
    fs::create_dir_all(root).map_err(|e| HarnessError::io(root, e))?;
    let m = RunManifest {
        command: command.to_string(),
        seed,
        config: serde_json::to_value(config)?,
        artifacts: scan(root)?,
    };
    let path = root.join(MANIFEST_NAME);
    fs::write(&path, serde_json::to_vec_pretty(&m)?).map_err(|e| HarnessError::io(&path, e))?;
    Ok(m)
}
