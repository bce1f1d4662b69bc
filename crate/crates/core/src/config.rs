//! Experiment configuration: one JSON document, every field optional.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{CostWeights, LqrGains};
use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};
use crate::field::FieldParams;
use crate::geometry::FeatureMode;
use crate::learning::{ModelKind, TrainConfig};
use crate::pipeline::{CollectContext, Deployment, GridSpec, SweepConfig, StagePlan, TrajectorySpec, Transect};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub follower: TrajectorySpec,
    /// Flight time, s.
    pub duration: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { follower: TrajectorySpec::Transect(Transect::default()), duration: 12.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoriesConfig {
    pub simulate: SimulateConfig,
    pub deployment: Deployment,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub mode: FeatureMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Equivariant, mode: FeatureMode::NearHover }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportConfig {
    pub top_down: GridSpec,
    pub sagittal: GridSpec,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { top_down: GridSpec::top_down(), sagittal: GridSpec::sagittal() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub vehicle: VehicleParams,
    pub lqr: CostWeights,
    pub field: FieldParams,
    pub train: TrainConfig,
    pub plan: StagePlan,
    pub trajectories: TrajectoriesConfig,
    pub model: ModelConfig,
    pub sweep: SweepConfig,
    pub export: ExportConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.lqr.validate()?;
        self.field.validate()?;
        self.train.validate()?;
        self.plan.validate()?;
        self.export.top_down.validate()?;
        self.export.sagittal.validate()?;
        if !(self.trajectories.simulate.duration > 0.0) {
            return Err(Error::InvalidArgument("simulate duration must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration (defaults filled in), hex.
    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn gains(&self) -> Result<LqrGains> {
        LqrGains::design(&self.lqr)
    }

    pub fn context<'a>(&'a self, gains: &'a LqrGains) -> CollectContext<'a> {
        CollectContext { plan: &self.plan, field: &self.field, gains, vehicle: self.vehicle }
    }
}
