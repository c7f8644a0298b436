//! `manifest.json`: the resolved config, its hash and hashes of every output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::ExperimentOutput;
use crate::records::{write_runs_file, write_summary_file};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment_id: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// File name relative to the run directory, mapped to its SHA-256.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form, so formatting and key order in the
/// source file do not matter.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("config serializes"))
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("traces").join(format!("seed_{seed}.json"))
}

/// Writes `runs.csv`, `summary.csv`, optional traces and `manifest.json` into `dir`.
pub fn write_experiment(dir: &Path, out: &ExperimentOutput) -> Result<Manifest> {
    create_dir(dir)?;
    let mut names = vec!["runs.csv".to_string(), "summary.csv".to_string()];
    write_runs_file(&dir.join("runs.csv"), &out.records)?;
    write_summary_file(&dir.join("summary.csv"), &out.summary)?;
    if out.config.output.traces {
        create_dir(&dir.join("traces"))?;
        for run in &out.runs {
            write_json(&trace_path(dir, run.seed), &run.trace)?;
            names.push(format!("traces/seed_{}.json", run.seed));
        }
    }
    let mut files = BTreeMap::new();
    for name in names {
        files.insert(name.clone(), hash_file(&dir.join(&name))?);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment_id: out.config.experiment_id.clone(),
        config_hash: config_hash(&out.config),
        config: out.config.clone(),
        files,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    crate::experiment::read_json(&dir.join("manifest.json"))
}
