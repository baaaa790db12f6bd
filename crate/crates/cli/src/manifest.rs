//! Run manifest: config digest, seeds, checks and the output inventory.

use crate::config::ExperimentConfig;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparison: &'static str,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, comparison: &'static str, threshold: f64) -> Self {
        let passed = match comparison {
            "<=" => value <= threshold,
            ">=" => value >= threshold,
            _ => unreachable!("unknown comparison {comparison}"),
        };
        Self {
            name: name.to_string(),
            value,
            comparison,
            threshold,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    /// None for the manifest itself.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub kind: String,
    pub config_digest: String,
    pub code_version: String,
    pub wall_time_s: f64,
    pub master_seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub overrides: Vec<String>,
    pub results: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub files: Vec<FileEntry>,
}

/// SHA-256 of the canonical (key-sorted) JSON of the config.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical().as_bytes()))
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, seeds: BTreeMap<String, u64>, overrides: Vec<String>, results: Value, checks: Vec<Check>, wall_time_s: f64) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            kind: cfg.kind.name().to_string(),
            config_digest: config_digest(cfg),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s,
            master_seed: cfg.seed,
            seeds,
            overrides,
            results,
            checks,
            passed,
            files: Vec::new(),
        }
    }

    /// Inventories every file under `out` and writes the manifest there.
    pub fn write(mut self, out: &Path) -> std::io::Result<Self> {
        let mut files = Vec::new();
        collect(out, out, &mut files)?;
        files.retain(|f| f.path != MANIFEST_FILE);
        files.push(FileEntry {
            path: MANIFEST_FILE.to_string(),
            bytes: 0,
            sha256: None,
        });
        files.sort_by(|a, b| a.path.cmp(&b.path));
        self.files = files;
        let text = serde_json::to_string_pretty(&self).map_err(std::io::Error::other)? + "\n";
        std::fs::write(out.join(MANIFEST_FILE), text)?;
        Ok(self)
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<FileEntry>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect(root, &p, out)?;
        } else {
            let bytes = std::fs::read(&p)?;
            let rel = p.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
            out.push(FileEntry {
                path: rel,
                bytes: bytes.len() as u64,
                sha256: Some(hex::encode(Sha256::digest(&bytes))),
            });
        }
    }
    Ok(())
}
