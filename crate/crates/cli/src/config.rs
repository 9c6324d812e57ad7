//! Per-command JSON configuration. Unknown keys are rejected everywhere.
//!
//! Each file type resolves to a fully populated form (defaults filled in,
//! `--seed` applied) which is echoed into the run manifest and re-parses to
//! the same value.

use std::fs;
use std::path::Path;

use gridlab_core::montecarlo::{ExperimentConfig, SweepGrid};
use gridlab_core::thermal::{Building, ThermalScenario};
use gridlab_core::{ParamSet, Params, SimConfig, State};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn default_record_every() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub params: Params,
    #[serde(default)]
    pub x0: State,
    pub steps: u64,
    /// Defaults to 10% of `steps`.
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
}

impl SimulateFile {
    pub fn resolve(mut self, seed: Option<u64>) -> Self {
        self.burn_in = Some(self.burn_in.unwrap_or(self.steps / 10));
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            params: self.params,
            x0: self.x0,
            steps: self.steps,
            burn_in: self.burn_in.unwrap_or(self.steps / 10),
            seed: self.seed,
            record_every: self.record_every,
        }
    }
}

fn default_mc_samples() -> u64 {
    100_000
}

fn default_extent() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftFile {
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo transitions per state; 0 skips the estimate.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: u64,
    /// Explicit states, reported first.
    #[serde(default)]
    pub points: Vec<State>,
    /// Additional uniformly sampled states per region.
    #[serde(default)]
    pub per_region: usize,
    /// Sampling box: `z ∈ [0, extent]`, unbounded reserve ranges cut at `extent`.
    #[serde(default = "default_extent")]
    pub extent: f64,
}

impl DriftFile {
    pub fn resolve(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    /// Base parameters; grid axes override `mu`, `lambda` and `r_star`.
    pub params: ParamSet,
    pub grid: SweepGrid,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl SweepFile {
    pub fn resolve(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.experiment.seed = s;
        }
        self.experiment.burn_in = Some(self.experiment.burn_in());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalFile {
    pub building: Building,
    pub scenario: ThermalScenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.n {
            0 => vec![],
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

fn default_r_axis() -> Axis {
    Axis { min: -100.0, max: 100.0, n: 201 }
}

fn default_z_axis() -> Axis {
    Axis { min: 0.0, max: 200.0, n: 201 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsFile {
    pub params: Params,
    #[serde(default = "default_r_axis")]
    pub r: Axis,
    #[serde(default = "default_z_axis")]
    pub z: Axis,
}
