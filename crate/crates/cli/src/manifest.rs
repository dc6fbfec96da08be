use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: &'a str,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub files: Vec<String>,
    pub created_unix: u64,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: &[u8], seed: Option<u64>, files: Vec<String>) -> Self {
        Self {
            tool: "fspde",
            version: env!("CARGO_PKG_VERSION"),
            core_version: fspde_core::VERSION,
            command,
            config_sha256: hex::encode(Sha256::digest(config)),
            seed,
            threads: rayon::current_num_threads(),
            files,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}
