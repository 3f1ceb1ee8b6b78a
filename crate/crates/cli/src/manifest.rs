//! `run.json`: resolved configuration, seeds and file hashes of one command.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use microgest::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Settings;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "run.json";

#[derive(Serialize)]
struct Manifest<'a> {
    version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'a str,
    seed: u64,
    seeds: &'a BTreeMap<String, u64>,
    config: BTreeMap<String, serde_json::Value>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    summary: &'a serde_json::Value,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Output directory of one command; tracks what was read and written.
pub struct Run {
    command: &'static str,
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub summary: serde_json::Value,
}

impl Run {
    pub fn new(command: &'static str, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
        Ok(Self {
            command,
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: BTreeMap::new(),
            summary: serde_json::Value::Null,
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Path of output `name`, recorded for hashing.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn finish(self, settings: &Settings) -> Result<PathBuf> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
            .collect::<Result<_>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|n| Ok((n.clone(), sha256_file(&self.dir.join(n))?)))
            .collect::<Result<_>>()?;
        let m = Manifest {
            version: MANIFEST_VERSION,
            tool: "microgest",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            seed: settings.seed,
            seeds: &self.seeds,
            config: settings.resolved(),
            inputs,
            outputs,
            summary: &self.summary,
        };
        let path = self.dir.join(MANIFEST_FILE);
        microgest::io::save_json(&path, &m)?;
        Ok(path)
    }
}
