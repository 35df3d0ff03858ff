use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Record of one CLI invocation, written next to its artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: Vec<PathBuf>,
    pub threads: usize,
    pub started_utc: String,
    pub finished_utc: String,
}

pub struct ManifestBuilder {
    subcommand: String,
    config: serde_json::Value,
    seeds: BTreeMap<String, u64>,
    artifacts: Vec<PathBuf>,
    started: DateTime<Utc>,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            subcommand: subcommand.to_string(),
            config: serde_json::to_value(config)?,
            seeds: BTreeMap::new(),
            artifacts: Vec::new(),
            started: Utc::now(),
        })
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn artifact(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.artifacts.push(path.into());
        self
    }

    pub fn finish(self, out: &Path) -> anyhow::Result<PathBuf> {
        let m = RunManifest {
            subcommand: self.subcommand,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            seeds: self.seeds,
            artifacts: self.artifacts,
            threads: rayon::current_num_threads(),
            started_utc: stamp(self.started),
            finished_utc: stamp(Utc::now()),
        };
        let path = out.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
