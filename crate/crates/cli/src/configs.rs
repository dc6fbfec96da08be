//! Strict JSON configs; unknown keys are rejected.

use std::path::{Path, PathBuf};

use fspde_core::harness::SchemeSpec;
use fspde_core::{EstimatorKind, InitKind, ModelSpec, ProjectionSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Failure;

fn one() -> f64 {
    1.0
}

fn one_step() -> usize {
    1
}

fn default_table_sizes() -> Vec<usize> {
    vec![32, 64, 128, 256, 512, 1024]
}

fn burn_in() -> InitKind {
    InitKind::BurnIn
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    pub model: ModelSpec,
    #[serde(default = "one")]
    pub dt: f64,
    #[serde(default)]
    pub projection: Option<ProjectionSpec>,
    /// Sample sizes for the `s_n` and rate tables.
    #[serde(default = "default_table_sizes")]
    pub table_sizes: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    #[serde(default = "one")]
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default = "burn_in")]
    pub init: InitKind,
    /// Burn-in length in steps; defaults to twenty relaxation times of the
    /// slowest mode.
    #[serde(default)]
    pub burn_in_steps: Option<usize>,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default = "one_step")]
    pub substeps: usize,
    #[serde(default)]
    pub projection: Option<ProjectionSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub replication: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Defaults to both norm estimators, plus both projection estimators
    /// when a projection is given.
    #[serde(default)]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub projection: Option<ProjectionSpec>,
    /// Standardize against this drift using the asymptotic constants.
    #[serde(default)]
    pub true_alpha: Option<f64>,
}

/// Raw config bytes and the parsed value.
pub struct Loaded<T> {
    pub raw: Vec<u8>,
    pub value: T,
    pub base: Option<PathBuf>,
}

/// `source` is either an inline JSON object or a path to a JSON file.
pub fn load<T: DeserializeOwned>(source: Option<&str>) -> Result<Loaded<T>, Failure> {
    let source = source.ok_or_else(|| Failure::new("usage", "--config is required"))?;
    let (raw, base) = if source.trim_start().starts_with('{') {
        (source.as_bytes().to_vec(), None)
    } else {
        let path = Path::new(source);
        let raw = std::fs::read(path).map_err(|e| Failure::new("io", format!("{source}: {e}")))?;
        (raw, path.parent().map(Path::to_path_buf))
    };
    let value = serde_json::from_slice(&raw).map_err(|e| Failure::new("config", e.to_string()))?;
    Ok(Loaded { raw, value, base })
}
