//! Scenario configuration.
//!
//! A config is a TOML document with the sections `[system]`, `[hose]`,
//! `[quadrotor.N]`, `[scenario]`, `[controller]` and `[output]`. All values
//! are SI: metres, kilograms, seconds, radians unless a key says degrees.
//! The files in `configs/` use every section.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flexhose::control::{BlockWeights, FeedforwardGains};
use flexhose::flatness::{DesiredPoint, FlatOutputs, FlatTrajectory};
use flexhose::geometry::{e3, Vec3};
use flexhose::model::DEFAULT_GRAVITY;
use flexhose::sim::{InitialError, Reference};
use flexhose::{ControlInput, Quadrotor, SystemParams, SystemState};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub system: SystemSection,
    pub hose: HoseSection,
    /// Keyed by the node the quadrotor is attached to.
    pub quadrotor: BTreeMap<String, QuadSection>,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self { gravity: DEFAULT_GRAVITY }
    }
}

/// Either the uniform keys or the per-link lists must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoseSection {
    /// Number of links `n`.
    pub links: usize,
    /// Length of every link (m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_length: Option<f64>,
    /// `l_1..l_n` (m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    /// Mass of every node (kg).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_mass: Option<f64>,
    /// `m_0..m_n` (kg).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    /// Vehicle mass (kg), added to the node mass.
    pub mass: f64,
    /// Principal moments of inertia (kg m²).
    pub inertia: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Hold the static hanging shape through `start` and `targets`.
    Setpoint,
    /// Track `flat`.
    Trajectory,
    /// Track `flat` with the hose start pinned at the origin.
    Tethered,
    /// Release a straight, vertically hanging hose at `start`.
    Freefall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub mode: Mode,
    /// Hose start `x_0` (m).
    #[serde(default)]
    pub start: [f64; 3],
    /// Positions of the other quadrotors in node order (m).
    #[serde(default)]
    pub targets: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat: Option<FlatOutputs>,
    /// Simulated time (s).
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Integration step (s).
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    /// Link and attitude offsets at `t = 0` (degrees).
    #[serde(default)]
    pub initial_error: InitialError,
}

fn default_duration() -> f64 {
    10.0
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Lqr,
    Feedforward,
    OpenLoop,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    /// Riccati grid and linearization sample step (s).
    pub grid_dt: f64,
    /// RK4 steps per grid interval.
    pub substeps: usize,
    /// Riccati horizon (s); the scenario duration when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Gain schedule to load instead of synthesizing one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_file: Option<PathBuf>,
    pub weights: BlockWeights,
    pub feedforward: FeedforwardGains,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Lqr,
            grid_dt: 0.01,
            substeps: 1,
            horizon: None,
            gain_file: None,
            weights: BlockWeights::default(),
            feedforward: FeedforwardGains::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Log records per second of simulated time.
    pub log_rate: f64,
    /// Sample step of `plan` (s).
    pub plan_dt: f64,
    /// Sample step of `linearize` (s).
    pub linearize_dt: f64,
    pub benchmark_links: Vec<usize>,
    /// Simulated time per benchmark case (s).
    pub benchmark_duration: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            log_rate: 100.0,
            plan_dt: 0.01,
            linearize_dt: 1.0,
            benchmark_links: vec![5, 10, 20, 40],
            benchmark_duration: 10.0,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub gain_file: Option<PathBuf>,
    pub log_rate: Option<f64>,
}

fn invalid(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.to_path_buf(), message: message.into() }
}

impl Config {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(path, e.to_string().trim_end()))
    }

    /// Reads a TOML config, or the resolved config stored in a run manifest
    /// when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| invalid(path, e.to_string()))?;
        if path.extension().is_some_and(|ext| ext == "json") {
            let manifest: crate::output::RunManifest =
                serde_json::from_str(&text).map_err(|e| invalid(path, e.to_string()))?;
            return Ok(manifest.config);
        }
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| invalid(Path::new("<serialize>"), e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.out_dir {
            self.output.dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.scenario.seed = s;
        }
        if let Some(dt) = o.dt {
            self.scenario.dt = dt;
        }
        if let Some(d) = o.duration {
            self.scenario.duration = d;
        }
        if let Some(g) = &o.gain_file {
            self.controller.gain_file = Some(g.clone());
        }
        if let Some(r) = o.log_rate {
            self.output.log_rate = r;
        }
    }

    /// Quadrotors sorted by node.
    fn quadrotors(&self, path: &Path) -> Result<Vec<Quadrotor>, CliError> {
        let mut quads = Vec::with_capacity(self.quadrotor.len());
        for (key, q) in &self.quadrotor {
            let node: usize = key
                .parse()
                .map_err(|_| invalid(path, format!("[quadrotor.{key}]: key must be a node index")))?;
            quads.push(Quadrotor::new(node, q.mass, q.inertia));
        }
        quads.sort_by_key(|q| q.node);
        Ok(quads)
    }

    pub fn params(&self, path: &Path) -> Result<SystemParams, CliError> {
        let h = &self.hose;
        let n = h.links;
        let lengths = match (&h.link_length, &h.lengths) {
            (Some(l), None) => vec![*l; n],
            (None, Some(ls)) if ls.len() == n => ls.clone(),
            (None, Some(ls)) => {
                return Err(invalid(path, format!("[hose] {n} links but {} lengths", ls.len())))
            }
            _ => return Err(invalid(path, "[hose] needs exactly one of link_length and lengths")),
        };
        let masses = match (&h.node_mass, &h.masses) {
            (Some(m), None) => vec![*m; n + 1],
            (None, Some(ms)) => ms.clone(),
            _ => return Err(invalid(path, "[hose] needs exactly one of node_mass and masses")),
        };
        Ok(SystemParams::new(lengths, masses, self.quadrotors(path)?, self.system.gravity)?)
    }

    pub fn tethered(&self) -> bool {
        self.scenario.mode == Mode::Tethered
    }

    pub fn log_interval(&self) -> f64 {
        1.0 / self.output.log_rate
    }

    pub fn horizon(&self) -> f64 {
        self.controller.horizon.unwrap_or(self.scenario.duration)
    }

    fn flat(&self, path: &Path) -> Result<FlatOutputs, CliError> {
        let mut flat = self
            .scenario
            .flat
            .clone()
            .ok_or_else(|| invalid(path, "[scenario.flat] is required for this mode"))?;
        flat.tethered = self.tethered();
        Ok(flat)
    }

    pub fn reference(&self, params: &SystemParams, path: &Path) -> Result<Reference, CliError> {
        let s = &self.scenario;
        let start = Vec3::from(s.start);
        Ok(match s.mode {
            Mode::Setpoint => {
                let targets: Vec<Vec3> = s.targets.iter().map(|t| Vec3::from(*t)).collect();
                Reference::setpoint(params, start, &targets)?
            }
            Mode::Trajectory | Mode::Tethered => {
                Reference::Trajectory(FlatTrajectory::new(params.clone(), self.flat(path)?)?)
            }
            Mode::Freefall => Reference::Static(hanging_point(params, start)?),
        })
    }
}

/// Straight hose hanging from `x0` with no input: the release state of a
/// free-fall run.
fn hanging_point(params: &SystemParams, x0: Vec3) -> Result<DesiredPoint, CliError> {
    let state = SystemState::straight(params, x0, -e3())?;
    let g = params.gravity();
    Ok(DesiredPoint {
        t: 0.0,
        input: ControlInput::zero(params.n_q()),
        v0_dot: -g * e3(),
        omega_dot: vec![Vec3::zeros(); params.n()],
        ang_vel_dot: vec![Vec3::zeros(); params.n_q()],
        tensions: vec![Vec3::zeros(); params.n()],
        tethered: false,
        state,
    })
}
