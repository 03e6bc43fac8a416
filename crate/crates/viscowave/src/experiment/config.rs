//! Experiment configuration: a single JSON document with a versioned schema.
//! Unknown keys are rejected everywhere; a config that parses is a config
//! whose every field was meant.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelParams, StepControl};
use crate::grid::{Field, Grid, GridError};
use crate::kernel::KernelSpec;
use crate::memory::{InitialHistory, MemoryError, MemoryMode, TimeProfile};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Run,
    Check,
    Sweep,
    CompareMemory,
    Perturb,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Run => "run",
            ExperimentKind::Check => "check",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::CompareMemory => "compare-memory",
            ExperimentKind::Perturb => "perturb",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub extents: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, GridError> {
        Grid::new(&self.extents, &self.nodes)
    }
}

/// Initial shape φ: either a sine product or explicit node values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    /// amplitude · Π sin(mode·π·x_d/L_d)
    Sine {
        amplitude: f64,
        #[serde(default = "default_mode")]
        mode: u32,
    },
    Nodes { values: Vec<f64> },
    Zero,
}

fn default_mode() -> u32 {
    1
}

impl ShapeConfig {
    pub fn build(&self, grid: &Grid) -> Result<Field, ConfigError> {
        match self {
            ShapeConfig::Sine { amplitude, mode } => {
                let m = *mode as f64;
                let a = *amplitude;
                Ok(grid.sample(|x| {
                    a * (0..grid.dim())
                        .map(|d| (m * std::f64::consts::PI * x[d] / grid.extent(d)).sin())
                        .product::<f64>()
                }))
            }
            ShapeConfig::Nodes { values } => {
                if values.len() != grid.len() {
                    return Err(ConfigError::Invalid(format!(
                        "shape has {} values, grid has {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                Ok(Field::from_values(grid, values.clone()))
            }
            ShapeConfig::Zero => Ok(grid.zero_field()),
        }
    }

    /// The same shape with a different sine amplitude (sweeps).
    pub fn with_amplitude(&self, amplitude: f64) -> Result<ShapeConfig, ConfigError> {
        match self {
            ShapeConfig::Sine { mode, .. } => Ok(ShapeConfig::Sine { amplitude, mode: *mode }),
            _ => Err(ConfigError::Invalid(
                "amplitude sweeps need a sine-shaped initial datum".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityConfig {
    /// g′(0)·φ
    FromProfile,
    Zero,
    Nodes { values: Vec<f64> },
}

impl Default for VelocityConfig {
    fn default() -> Self {
        VelocityConfig::FromProfile
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub shape: ShapeConfig,
    #[serde(default = "default_profile")]
    pub profile: TimeProfile,
    #[serde(default)]
    pub velocity: VelocityConfig,
}

fn default_profile() -> TimeProfile {
    TimeProfile::Constant
}

impl InitialConfig {
    pub fn build(&self, grid: &Grid) -> Result<InitialHistory, ConfigError> {
        let shape = self.shape.build(grid)?;
        let hist = InitialHistory::new(shape, self.profile)?;
        match &self.velocity {
            VelocityConfig::FromProfile => Ok(hist),
            VelocityConfig::Zero => Ok(hist.with_velocity(grid.zero_field())),
            VelocityConfig::Nodes { values } => {
                if values.len() != grid.len() {
                    return Err(ConfigError::Invalid(format!(
                        "velocity has {} values, grid has {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                Ok(hist.with_velocity(Field::from_values(grid, values.clone())))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub bisect: bool,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn default_resolution() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub grid: GridConfig,
    pub kernel: KernelSpec,
    pub model: ModelParams,
    pub initial: InitialConfig,
    #[serde(default)]
    pub step: StepControl,
    #[serde(default = "default_memory_mode")]
    pub memory_mode: MemoryMode,
    #[serde(default = "default_cadence")]
    pub recorder_cadence: u64,
    pub horizon: f64,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub perturb: Option<PerturbConfig>,
    /// Attach the blow-up functional Y (with the derived α, ε) to the energy
    /// trace whenever the proof parameters are defined.
    #[serde(default = "default_true")]
    pub lyapunov_auto: bool,
    /// Instantiate the generic constants of the escape-time bound.
    #[serde(default)]
    pub tmax_constant_tracking: bool,
    #[serde(default)]
    pub seed: u64,
    /// Write the initial and final displacement fields as CSV snapshots.
    #[serde(default)]
    pub export_fields: bool,
}

fn default_memory_mode() -> MemoryMode {
    MemoryMode::Prony
}

fn default_cadence() -> u64 {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug)]
pub enum ConfigError {
    Parse(serde_json::Error),
    SchemaVersion { found: u32, expected: u32 },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(e) => write!(f, "config parse: {e}"),
            ConfigError::SchemaVersion { found, expected } => {
                write!(f, "config schema version {found}, this build reads {expected}")
            }
            ConfigError::Invalid(msg) => write!(f, "config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        ConfigError::Parse(e)
    }
}

impl From<GridError> for ConfigError {
    fn from(e: GridError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

impl From<MemoryError> for ConfigError {
    fn from(e: MemoryError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                found: cfg.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid.build()?;
        self.kernel
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.model
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.step
            .validate(&self.model, &self.kernel)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if self.kind == ExperimentKind::Sweep {
            let sweep = self
                .sweep
                .as_ref()
                .ok_or_else(|| ConfigError::Invalid("kind sweep needs a sweep section".into()))?;
            if sweep.count < 2 || !(sweep.stop > sweep.start) {
                return Err(ConfigError::Invalid("sweep needs stop > start and count ≥ 2".into()));
            }
        }
        if self.kind == ExperimentKind::Perturb {
            let pert = self.perturb.as_ref().ok_or_else(|| {
                ConfigError::Invalid("kind perturb needs a perturb section".into())
            })?;
            if pert.deltas.is_empty() {
                return Err(ConfigError::Invalid("perturb needs at least one delta".into()));
            }
        }
        Ok(())
    }

    pub fn to_compact_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
