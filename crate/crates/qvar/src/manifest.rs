//! Run manifests: everything needed to repeat a run, plus artifact hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qvar_core::calibration::ParamOverrides;
use qvar_core::{ModelParams, SimConfig};
use serde::{Deserialize, Serialize};

use crate::config::SweepAxis;
use crate::error::{CliError, Result};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateSpec {
    pub data: PathBuf,
    pub data_sha256: String,
    /// File and flag overrides; they win over the estimates.
    pub overrides: ParamOverrides,
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSpec {
    pub params: ModelParams,
    pub times: Vec<f64>,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSpec {
    pub params: ModelParams,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub params: ModelParams,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum RunSpec {
    Calibrate(CalibrateSpec),
    Solve(SolveSpec),
    Simulate(SimulateSpec),
    Sweep(SweepSpec),
}

impl RunSpec {
    pub fn seed(&self) -> Option<u64> {
        match self {
            RunSpec::Simulate(s) => Some(s.sim.seed),
            RunSpec::Sweep(s) => Some(s.sim.seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub seed: Option<u64>,
    pub run: RunSpec,
    /// sha256 of each artifact, keyed by path relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(run: RunSpec, artifacts: BTreeMap<String, String>) -> Self {
        Manifest {
            tool: concat!("qvar ", env!("CARGO_PKG_VERSION")).to_string(),
            seed: run.seed(),
            run,
            artifacts,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
