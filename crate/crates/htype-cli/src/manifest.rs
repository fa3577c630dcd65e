//! Run manifest: what ran, on which config, against which tolerances.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: &'static str,
    pub config_sha256: String,
    pub versions: BTreeMap<&'static str, String>,
    pub threads: usize,
    /// Every tolerance that gates the pass/fail status.
    pub tolerances: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig, passed: bool, tolerances: BTreeMap<String, f64>, outputs: Vec<String>) -> Self {
        let canonical = cfg.canonical_json();
        let hash = Sha256::digest(canonical.as_bytes());
        let versions = BTreeMap::from([
            ("htype", htype::VERSION.to_string()),
            ("htype-cli", env!("CARGO_PKG_VERSION").to_string()),
            ("format", "1".to_string()),
        ]);
        Self {
            command: command.into(),
            status: if passed { "pass" } else { "fail" },
            config_sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
            versions,
            threads: rayon::current_num_threads(),
            tolerances,
            outputs,
            config: serde_json::from_str(&canonical).expect("canonical config is JSON"),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n")
    }
}
