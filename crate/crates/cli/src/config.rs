//! Declarative pipeline configuration (TOML). Unknown keys are rejected at
//! every level so typos fail loudly instead of silently using defaults.
use std::path::{Path, PathBuf};

use pgnn_core::data::RegressorSpec;
use pgnn_core::extrap::OperatingRegion;
use pgnn_core::recipes::{
    clm_reference, clm_region, clm_spec, clm_sweep, clm_training_references, rotating_reference, rotating_spec,
    ClmController, ClmHyper, RotatingController, RotatingHyper, CLM_NOMINAL, TS,
};
use pgnn_core::stability::ProjectionMode;
use pgnn_core::sim::{ClmParams, PlantParams, ReferenceParams, RotatingParams};
use pgnn_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    /// Synthetic coreless linear motor.
    Clm,
    /// Rotating–translating mass (nonminimum phase).
    Rotating,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// I/O log CSV (`t,u,y`); generated from the plant when absent.
    pub data: Option<PathBuf>,
    /// Directory holding trained controller files.
    pub models: Option<PathBuf>,
    /// Output directory (overridden by `--out`).
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataOptions {
    /// Keep every n-th regressor.
    pub decimate: usize,
    /// Training fraction of the regressor set.
    pub train_fraction: f64,
}

impl Default for DataOptions {
    fn default() -> Self {
        Self { decimate: 1, train_fraction: 0.7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityApproach {
    /// Retrain the whole network inside Θ (output-layer projection).
    CompleteRetrain,
    /// Retrain with only the past-input columns of the first layer rescaled.
    PartialRetrain,
    /// Deploy the network next to a ZPETC linear part.
    Zpetc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityOptions {
    /// Q = q_scale · I in the Lyapunov equation.
    pub q_scale: f64,
    pub approach: StabilityApproach,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { q_scale: 1.0, approach: StabilityApproach::CompleteRetrain }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// The nominal CLM back-and-forth move.
    ClmNominal,
    /// The six training references.
    ClmTraining,
    /// 5 end positions + 7 velocities + 5 accelerations.
    ClmSweep,
    /// The rotating-mass evaluation move.
    Rotating,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub reference: Option<ReferenceParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub plant: PlantKind,
    #[serde(default)]
    pub seed: u64,
    /// Controllers to train / simulate, by recipe name; `none` is feedback only.
    #[serde(default)]
    pub controllers: Vec<String>,
    /// Regressor shape for `identify`; the training recipes use their own.
    #[serde(default)]
    pub regressor: Option<RegressorSpec>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub data: DataOptions,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub clm: ClmHyper,
    #[serde(default)]
    pub rotating: RotatingHyper,
    #[serde(default)]
    pub clm_plant: ClmParams,
    #[serde(default)]
    pub rotating_plant: Option<RotatingParams>,
    #[serde(default)]
    pub region: Option<OperatingRegion>,
    #[serde(default)]
    pub stability: StabilityOptions,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

/// A controller name resolved against the configured plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    ClmNone,
    Clm(ClmController),
    Rotating(RotatingController),
}

impl Controller {
    pub fn name(&self) -> String {
        match self {
            Controller::ClmNone => "none".into(),
            Controller::Clm(c) => enum_name(c),
            Controller::Rotating(c) => enum_name(c),
        }
    }
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Apply the command-line seed; the training seed always follows it.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.train.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.controllers()?;
        if self.data.decimate == 0 {
            return Err(CliError::Config("data.decimate must be at least 1".into()));
        }
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return Err(CliError::Config("data.train_fraction must lie in (0, 1)".into()));
        }
        if !(self.stability.q_scale > 0.0) {
            return Err(CliError::Config("stability.q_scale must be positive".into()));
        }
        if let Some(r) = &self.region {
            r.validate()?;
        }
        if let Some(s) = &self.regressor {
            s.validate()?;
        }
        self.train.lm.validate()?;
        let implied = match self.stability.approach {
            StabilityApproach::CompleteRetrain => Some(ProjectionMode::OutputLayer),
            StabilityApproach::PartialRetrain => Some(ProjectionMode::InputColumns),
            StabilityApproach::Zpetc => None,
        };
        if implied.is_some_and(|m| m != self.rotating.mode) {
            return Err(CliError::Config(format!(
                "stability.approach {:?} conflicts with rotating.mode {:?}",
                self.stability.approach, self.rotating.mode
            )));
        }
        if self.stability.approach == StabilityApproach::Zpetc
            && self.controllers()?.contains(&Controller::Rotating(RotatingController::PgnnPreview))
        {
            return Err(CliError::Config("stability.approach = \"zpetc\" excludes the pgnn_preview controller".into()));
        }
        for s in &self.scenarios {
            if s.preset.is_some() == s.reference.is_some() {
                return Err(CliError::Config("each scenario needs exactly one of `preset` or `reference`".into()));
            }
            if s.reference.is_some() && s.name.is_none() {
                return Err(CliError::Config("explicit scenario references need a `name`".into()));
            }
        }
        Ok(())
    }

    pub fn controllers(&self) -> Result<Vec<Controller>, CliError> {
        self.controllers
            .iter()
            .map(|n| {
                let v = serde_json::Value::String(n.clone());
                let bad = || CliError::Config(format!("unknown controller `{n}` for plant {:?}", self.plant));
                match self.plant {
                    PlantKind::Clm if n == "none" => Ok(Controller::ClmNone),
                    PlantKind::Clm => serde_json::from_value(v).map(Controller::Clm).map_err(|_| bad()),
                    PlantKind::Rotating => serde_json::from_value(v).map(Controller::Rotating).map_err(|_| bad()),
                }
            })
            .collect()
    }

    pub fn plant_params(&self) -> PlantParams {
        match self.plant {
            PlantKind::Clm => PlantParams::ClmSynthetic(self.clm_plant.clone()),
            PlantKind::Rotating => PlantParams::Rotating(self.rotating_plant.clone().unwrap_or_else(RotatingParams::reference)),
        }
    }

    /// Regressor shape of the plant's recipes.
    pub fn recipe_spec(&self) -> RegressorSpec {
        match self.plant {
            PlantKind::Clm => clm_spec(),
            PlantKind::Rotating => rotating_spec(),
        }
    }

    pub fn region(&self) -> OperatingRegion {
        self.region.clone().unwrap_or_else(clm_region)
    }

    /// Scenario list with presets expanded, in configuration order.
    pub fn references(&self) -> Vec<(String, ReferenceParams)> {
        let mut out = Vec::new();
        for s in &self.scenarios {
            let prefix = |n: String| match &s.name {
                Some(p) => format!("{p}/{n}"),
                None => n,
            };
            match (s.preset, &s.reference) {
                (Some(Preset::ClmNominal), _) => {
                    out.push((s.name.clone().unwrap_or("nominal".into()), clm_reference(TS, 0.1, CLM_NOMINAL)))
                }
                (Some(Preset::ClmTraining), _) => {
                    for (i, r) in clm_training_references(TS).into_iter().enumerate() {
                        out.push((prefix(format!("train{}", i + 1)), r));
                    }
                }
                (Some(Preset::ClmSweep), _) => {
                    for (n, r) in clm_sweep(TS) {
                        out.push((prefix(n), r));
                    }
                }
                (Some(Preset::Rotating), _) => {
                    out.push((s.name.clone().unwrap_or("rotating".into()), rotating_reference(TS)))
                }
                (None, Some(r)) => out.push((s.name.clone().unwrap_or_default(), r.clone())),
                (None, None) => {}
            }
        }
        out
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(canon.as_bytes()))
    }
}
