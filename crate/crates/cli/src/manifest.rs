use std::path::Path;

use rabisense::inference::FisherConfig;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::{write_bytes, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    /// Stopped before every trajectory was stored; rerun to resume.
    Interrupted,
    /// Finished, but the failure fraction exceeded the threshold.
    Partial,
}

/// Trajectory `i` of a size uses the ChaCha8 stream `i` of `master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master_seed: u64,
    pub first_stream: u64,
    pub n_streams: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeManifest {
    pub eta: f64,
    pub params_hash: String,
    pub seeds: Seeds,
    pub n_traj: usize,
    pub completed: usize,
    pub quarantined: Vec<u64>,
    pub failure_fraction: f64,
    pub elapsed_s: f64,
}

impl SizeManifest {
    pub fn new(eta: f64, fc: &FisherConfig, completed: usize) -> Self {
        Self {
            eta,
            params_hash: fc.params_hash(),
            seeds: Seeds { master_seed: fc.master_seed, first_stream: 0, n_streams: fc.n_traj as u64 },
            n_traj: fc.n_traj,
            completed,
            quarantined: Vec::new(),
            failure_fraction: 0.0,
            elapsed_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub scheme: String,
    pub status: RunStatus,
    pub sizes: Vec<SizeManifest>,
    pub elapsed_s: f64,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, prov: &Provenance) -> Self {
        Self {
            config_hash: prov.config_hash.clone(),
            version: prov.version.to_string(),
            scheme: format!("{:?}", cfg.scheme).to_lowercase(),
            status: RunStatus::Complete,
            sizes: Vec::new(),
            elapsed_s: 0.0,
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_bytes(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Ok(serde_json::from_slice(&crate::output::read_bytes(path)?)?)
    }
}
