//! Experiment configuration files and their per-mode parameter blocks.

use std::fs;
use std::path::{Path, PathBuf};

use ablab::electric::{ElectricConfig, ElectricMode};
use ablab::gauge::PhysicalConstants;
use ablab::geometry::Scene;
use ablab::optics::BeamSpec;
use ablab::recovery::FluxSystem;
use ablab::tdse::{LatticeSpec, TwoBeamOptions};
use ablab::Vec2;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Trace,
    Flux,
    GoPredict,
    TdseRun,
    TwoBeam,
    ElectricAb,
    Recover,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Trace => "trace",
            Mode::Flux => "flux",
            Mode::GoPredict => "go-predict",
            Mode::TdseRun => "tdse-run",
            Mode::TwoBeam => "two-beam",
            Mode::ElectricAb => "electric-ab",
            Mode::Recover => "recover",
        }
    }
}

/// A scene given inline or as a path relative to the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SceneSource {
    Path(PathBuf),
    Inline(Scene),
}

/// Raw config file: `{mode?, scene?, constants?, params}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    mode: Option<Mode>,
    #[serde(default)]
    scene: Option<SceneSource>,
    #[serde(default)]
    constants: Option<PhysicalConstants>,
    #[serde(default)]
    params: serde_json::Value,
}

/// A loaded config with the scene resolved and the parameter block still raw.
#[derive(Debug)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub scene: Option<Scene>,
    pub scene_path: Option<PathBuf>,
    pub constants: PhysicalConstants,
    pub params: serde_json::Value,
}

impl ExperimentConfig {
    pub fn load(path: &Path, mode: Mode) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let raw: RawConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        if let Some(m) = raw.mode {
            if m != mode {
                return Err(CliError::config(format!(
                    "config is for mode {} but {} was requested",
                    m.name(),
                    mode.name()
                )));
            }
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let (scene, scene_path) = match raw.scene {
            None => (None, None),
            Some(SceneSource::Inline(s)) => (Some(s), None),
            Some(SceneSource::Path(p)) => {
                let full = base.join(&p);
                let text = fs::read_to_string(&full)
                    .map_err(|e| CliError::config(format!("cannot read scene {}: {e}", full.display())))?;
                let s: Scene = serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("scene {}: {e}", full.display())))?;
                (Some(s), Some(full))
            }
        };
        let constants = raw.constants.unwrap_or_default();
        constants.validate().map_err(CliError::invalid)?;
        Ok(Self { mode, scene, scene_path, constants, params: raw.params })
    }

    pub fn scene(&self) -> Result<&Scene, CliError> {
        self.scene
            .as_ref()
            .ok_or_else(|| CliError::config(format!("mode {} needs a scene", self.mode.name())))
    }

    pub fn params<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        let v = if self.params.is_null() { serde_json::json!({}) } else { self.params.clone() };
        serde_json::from_value(v).map_err(|e| CliError::config(format!("{} params: {e}", self.mode.name())))
    }
}

fn default_reflections() -> usize {
    32
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RaySeed {
    pub start: Vec2,
    pub direction: Vec2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceParams {
    #[serde(default)]
    pub rays: Vec<RaySeed>,
    /// Additional rays with exterior starts and directions drawn from the seed.
    #[serde(default)]
    pub random_rays: usize,
    #[serde(default = "default_reflections")]
    pub max_reflections: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoopSpec {
    Circle {
        center: Vec2,
        radius: f64,
        #[serde(default = "yes")]
        ccw: bool,
    },
    Polygon { vertices: Vec<Vec2> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxParams {
    #[serde(default)]
    pub loops: Vec<LoopSpec>,
    /// Additional random exterior circles drawn from the seed.
    #[serde(default)]
    pub random_loops: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoParams {
    pub beam1: BeamSpec,
    pub beam2: BeamSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub name: String,
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdseParams {
    pub lattice: LatticeSpec,
    pub beam: BeamSpec,
    pub steps: usize,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
    /// Density dump stride in steps; 0 dumps only the final state.
    #[serde(default)]
    pub dump_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoBeamParams {
    pub lattice: LatticeSpec,
    pub beam1: BeamSpec,
    pub beam2: BeamSpec,
    /// Defaults to the steps needed for both packets to reach the meeting point.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub options: TwoBeamOptions,
}

fn default_dump_every() -> usize {
    25
}

fn default_electric_mode() -> ElectricMode {
    ElectricMode::FullNumeric
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectricParams {
    /// Full setup; mutually exclusive with `reference_alpha`.
    #[serde(default)]
    pub setup: Option<ElectricConfig>,
    /// Use the calibrated reference setup tuned to this electric flux.
    #[serde(default)]
    pub reference_alpha: Option<f64>,
    #[serde(default = "default_electric_mode")]
    pub mode: ElectricMode,
    #[serde(default = "default_dump_every")]
    pub dump_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Circuit phases from the geometric-optics predictor.
    #[default]
    GoPhase,
    /// Only 4 sin²(β/2) per circuit.
    GoIntensity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverParams {
    /// Solve this system directly instead of designing and measuring circuits.
    #[serde(default)]
    pub system: Option<FluxSystem>,
    #[serde(default)]
    pub oracle: OracleKind,
}
