//! Run configuration: one TOML file with `[model]`, `[solver]`, `[policy]`,
//! `[simulation]` and optional `[sweep]` tables.

use std::fs;
use std::path::Path;

use poisson_disorder::model::{DiscountMode, ModelParams, ModelSpec};
use poisson_disorder::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[default]
    ThresholdSum,
    PerChannelMin,
    ValueRegion,
    EpsOptimal,
}

impl PolicyKind {
    pub fn needs_value_function(self) -> bool {
        matches!(self, PolicyKind::ValueRegion | PolicyKind::EpsOptimal)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    #[serde(default)]
    pub kind: PolicyKind,
    /// Overrides `κ` for `threshold-sum` and `λ/c` for `per-channel-min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Tolerance of the ε-optimal rule; defaults to `0.01/c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Number of stages of the ε-optimal rule; defaults to all solved stages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub reps: usize,
    /// Defaults to `20/min(λ, β)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Sample paths written by `simulate`.
    pub trajectories: usize,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            reps: 10_000,
            horizon: None,
            trajectories: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Alpha,
    Beta,
    Lambda,
    C,
    Pi1,
    Pi2,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::Lambda => "lambda",
            SweepParam::C => "c",
            SweepParam::Pi1 => "pi1",
            SweepParam::Pi2 => "pi2",
        }
    }

    pub fn set(self, m: &mut ModelSpec, value: f64) {
        match self {
            SweepParam::Alpha => m.alpha = value,
            SweepParam::Beta => m.beta = value,
            SweepParam::Lambda => m.lambda = value,
            SweepParam::C => m.c = value,
            SweepParam::Pi1 => m.pi1 = value,
            SweepParam::Pi2 => m.pi2 = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<DiscountMode>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: Overrides) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = overrides.mode {
            cfg.model.mode = mode;
        }
        cfg.params()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        self.model.to_params().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Canonical TOML form of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("run configuration serializes to TOML")
    }

    /// SHA-256 of the canonical form, in hex.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn horizon(&self, p: &ModelParams) -> f64 {
        self.simulation
            .horizon
            .unwrap_or_else(|| poisson_disorder::sim::default_horizon(p))
    }
}
