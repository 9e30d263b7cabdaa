//! Run configuration: one JSON document, overridden key by key by flags.

use std::path::Path;

use delamina::constructions::ConstructionId;
use delamina::scaling::SweepSpec;
use delamina::EnergyParams;
use serde::{Deserialize, Serialize};

use crate::ConfigError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub functional: Option<String>,
    pub construction: Option<ConstructionId>,
    pub params: Option<EnergyParams>,
    pub minimize: Option<MinimizeConfig>,
    pub sweep: Option<SweepSpec>,
    pub phase_diagram: Option<PhaseConfig>,
    pub stability: Option<StabilityConfig>,
    pub lift3d: Option<LiftConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Amplitude of the seeded perturbation applied to the initial state.
    pub noise: f64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-9,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub resolution: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            sigma_min: 1e-4,
            sigma_max: 1e-1,
            gamma_min: 1e-4,
            gamma_max: 1e2,
            resolution: 60,
        }
    }
}

/// Every physical field must be given; `n_points` and `delta_exp` have defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub young: Option<f64>,
    pub thickness: Option<f64>,
    pub radius: Option<f64>,
    pub nu: Option<f64>,
    pub n_points: Option<usize>,
    pub delta_exp: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftConfig {
    pub deltas: Vec<f64>,
    /// Thickness as a multiple of δ; the default 1 gives `σ = δ^{1/2}`.
    pub thickness_ratio: f64,
    pub nz: usize,
    /// Fixed mollification radius of the tent deflection.
    pub mollify: f64,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.1, 0.05, 0.025],
            thickness_ratio: 1.0,
            nz: 4,
            mollify: 0.1,
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("config {}: {e}", path.display())))
}
