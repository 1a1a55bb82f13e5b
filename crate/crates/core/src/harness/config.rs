use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::comms::{DelaySchedule, DelayShape, EdgeDelay, GraphSpec};
use crate::control::{ControlGains, StiffnessModel};
use crate::kinematics::KinematicModel;

pub const DEFAULT_DT: f64 = 1.0 / 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// End-effectors are points in the plane driven directly.
    Planar,
    /// Each robot is a mobile base carrying a six-joint arm.
    Embodied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Proposed,
    LeaderFollower,
    None,
}

/// One velocity component `base + sin·sin t + omega·Ω + omega_sin·Ω·sin t`
/// with a fresh `Ω ~ U(-1, 1)` every step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisProgram {
    pub base: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub sin: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub omega: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub omega_sin: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl AxisProgram {
    pub fn constant(base: f64) -> Self {
        Self { base, ..Self::default() }
    }

    pub fn random(base: f64, omega: f64) -> Self {
        Self { base, omega, ..Self::default() }
    }

    pub fn evaluate(&self, t: f64, omega: f64) -> f64 {
        let s = t.sin();
        self.base + self.sin * s + self.omega * omega + self.omega_sin * omega * s
    }

    fn is_finite(&self) -> bool {
        [self.base, self.sin, self.omega, self.omega_sin].iter().all(|x| x.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    /// Planar: initial end-effector `[x, y]`. Embodied: initial base
    /// `[x, y, heading]`.
    pub initial: Vec<f64>,
    /// Nominal velocity of the reference trajectory `[vx, vy]`.
    pub reference_velocity: [f64; 2],
    /// Disturbed velocity actually executed `[x, y]`.
    pub velocity: [AxisProgram; 2],
    /// Reference wrench; zeros when omitted.
    #[serde(default)]
    pub h_ref: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub control_onset: f64,
    pub stiffness: StiffnessModel,
    pub gains: ControlGains,
    pub graph: GraphSpec,
    pub delays: DelaySchedule,
    pub robots: Vec<RobotSpec>,
    pub rng_seed: u64,
    pub mode: Mode,
    pub controller: ControllerKind,
    /// Leader index for the leader-follower controller.
    #[serde(default)]
    pub leader: usize,
    /// Arm description for embodied runs; the bundled approximate cobot
    /// when omitted. Relative paths resolve against the config file.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Record the Lyapunov functional of the joint errors each step (needs
    /// certified gains).
    #[serde(default)]
    pub record_lyapunov: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Error-norm threshold defining convergence (N).
    pub threshold: f64,
    /// Length of the final window averaged for the steady-state error (s).
    pub steady_window: f64,
    /// Window `[start, end]` for the windowed average error (s).
    pub average_window: [f64; 2],
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { threshold: 0.5, steady_window: 5.0, average_window: [45.0, 50.0] }
    }
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

/// Delay profiles of the five-robot scenario as `(receiver, sender, shape)`,
/// all with bound 0.01 s.
pub fn table2_delays() -> DelaySchedule {
    use DelayShape::*;
    let a = 0.01;
    let edges = [
        (0, 1, AbsSin { amplitude: a }),
        (0, 2, AbsRandom { amplitude: a }),
        (0, 3, AbsCos { amplitude: a }),
        (0, 4, AbsRandom { amplitude: a }),
        (1, 0, Inverse { amplitude: 0.02 }),
        (1, 2, InverseSquare { amplitude: 0.02 }),
        (1, 3, ExpDecay { amplitude: 1.0 }),
        (1, 4, TimeExpDecay { amplitude: 1.0 }),
        (2, 0, AbsRandom { amplitude: a }),
        (2, 1, AbsRandom { amplitude: a }),
        (2, 3, Log { amplitude: 0.002 }),
        (2, 4, InverseLog { amplitude: 0.02 }),
        (3, 0, InverseLog { amplitude: 0.02 }),
        (3, 1, AbsSin { amplitude: a }),
        (3, 2, AbsCos { amplitude: a }),
        (3, 4, AbsRandom { amplitude: a }),
        (4, 0, AbsRandom { amplitude: a }),
        (4, 1, AbsRandom { amplitude: a }),
        (4, 2, AbsRandom { amplitude: a }),
        (4, 3, AbsRandom { amplitude: a }),
    ];
    DelaySchedule {
        bound: a,
        edges: edges.into_iter().map(|(receiver, sender, shape)| EdgeDelay { receiver, sender, shape }).collect(),
    }
}

fn table2_programs() -> [[AxisProgram; 2]; 5] {
    [
        [AxisProgram::random(0.1, 0.05), AxisProgram::random(0.1, 0.1)],
        [AxisProgram { base: 0.1, sin: 0.01, ..Default::default() }, AxisProgram::constant(0.08)],
        [AxisProgram::constant(0.12), AxisProgram::random(0.1, 0.2)],
        [AxisProgram { base: 0.11, omega_sin: 0.05, ..Default::default() }, AxisProgram::random(0.1, 0.2)],
        [AxisProgram::random(0.1, 0.1), AxisProgram::constant(0.11)],
    ]
}

impl ScenarioConfig {
    /// Five robots around a shared object for 60 s with the correction
    /// enabled at 40 s, over the sparse two-predecessor topology.
    pub fn table2() -> Self {
        let robots = table2_programs()
            .into_iter()
            .enumerate()
            .map(|(i, velocity)| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / 5.0;
                RobotSpec {
                    initial: vec![round6(angle.cos()), round6(angle.sin())],
                    reference_velocity: [0.1, 0.1],
                    velocity,
                    h_ref: None,
                }
            })
            .collect();
        Self {
            name: "table2_weak".into(),
            n: 5,
            duration: 60.0,
            dt: DEFAULT_DT,
            control_onset: 40.0,
            stiffness: StiffnessModel::new(vec![10.5, 9.5]).expect("positive stiffness"),
            gains: ControlGains::new(0.5, 0.1).expect("positive gains"),
            graph: GraphSpec::Circulant { shifts: vec![1, 2] },
            delays: table2_delays(),
            robots,
            rng_seed: 1,
            mode: Mode::Planar,
            controller: ControllerKind::Proposed,
            leader: 0,
            model: None,
            metrics: MetricsConfig::default(),
            record_lyapunov: false,
        }
    }

    pub fn table2_complete() -> Self {
        Self { name: "table2_complete".into(), graph: GraphSpec::Complete, ..Self::table2() }
    }

    /// Same programs executed by mobile manipulators; bases start 1.5 m
    /// from the object centre facing it. The arms can only absorb drift
    /// within their reach, so the correction starts after 5 s of a 20 s run.
    pub fn table2_embodied() -> Self {
        let mut cfg = Self::table2();
        cfg.name = "table2_embodied".into();
        cfg.duration = 20.0;
        cfg.control_onset = 5.0;
        cfg.metrics.average_window = [10.0, 15.0];
        cfg.mode = Mode::Embodied;
        cfg.stiffness = StiffnessModel::new(vec![10.5, 9.5, 10.0, 5.0, 5.0, 5.0]).expect("positive stiffness");
        for (i, r) in cfg.robots.iter_mut().enumerate() {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / 5.0;
            r.initial = vec![round6(1.5 * angle.cos()), round6(1.5 * angle.sin()), round6(angle + std::f64::consts::PI)];
        }
        cfg
    }

    /// Robot 1 replaced by the strongly disturbed program `0.1 + Ω` on both axes.
    pub fn with_large_disturbance(mut self) -> Self {
        self.robots[0].velocity = [AxisProgram::random(0.1, 1.0), AxisProgram::random(0.1, 1.0)];
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_delay_bound(mut self, bound: f64) -> Self {
        self.delays = self.delays.with_bound(bound);
        self
    }

    pub fn with_controller(mut self, controller: ControllerKind) -> Self {
        self.controller = controller;
        self
    }

    pub fn with_graph(mut self, graph: GraphSpec) -> Self {
        self.graph = graph;
        self
    }

    /// Every velocity program replaced by its reference velocity.
    pub fn without_disturbance(mut self) -> Self {
        for r in &mut self.robots {
            r.velocity = [AxisProgram::constant(r.reference_velocity[0]), AxisProgram::constant(r.reference_velocity[1])];
        }
        self
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn task_dim(&self) -> usize {
        match self.mode {
            Mode::Planar => 2,
            Mode::Embodied => 6,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; a relative `model` path is
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(model), Some(dir)) = (cfg.model.as_mut(), path.parent()) {
            if model.is_relative() {
                *model = dir.join(&*model);
            }
        }
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load_model(&self) -> Result<KinematicModel, HarnessError> {
        match &self.model {
            Some(path) => KinematicModel::load(path).map_err(|e| HarnessError::ConfigInvalid(e.to_string())),
            None => Ok(KinematicModel::approximate_cobot()),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::ConfigInvalid(msg));
        if self.n < 2 {
            return bad(format!("need at least 2 robots, got {}", self.n));
        }
        if self.robots.len() != self.n {
            return bad(format!("{} robot entries for n = {}", self.robots.len(), self.n));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return bad(format!("duration must be non-negative, got {}", self.duration));
        }
        if !(0.0..=self.duration).contains(&self.control_onset) {
            return bad(format!("control onset {} outside [0, {}]", self.control_onset, self.duration));
        }
        let dim = self.task_dim();
        if self.stiffness.dim() != dim {
            return bad(format!("stiffness has {} entries, mode needs {dim}", self.stiffness.dim()));
        }
        let initial_len = match self.mode {
            Mode::Planar => 2,
            Mode::Embodied => 3,
        };
        for (i, r) in self.robots.iter().enumerate() {
            if r.initial.len() != initial_len || r.initial.iter().any(|x| !x.is_finite()) {
                return bad(format!("robot {i}: initial state needs {initial_len} finite values"));
            }
            if let Some(h) = &r.h_ref {
                if h.len() != dim || h.iter().any(|x| !x.is_finite()) {
                    return bad(format!("robot {i}: h_ref needs {dim} finite values"));
                }
            }
            if !r.velocity.iter().all(AxisProgram::is_finite) || !r.reference_velocity.iter().all(|x| x.is_finite()) {
                return bad(format!("robot {i}: velocity program must be finite"));
            }
        }
        if self.leader >= self.n {
            return bad(format!("leader {} out of range", self.leader));
        }
        let m = &self.metrics;
        if !(m.threshold > 0.0 && m.steady_window > 0.0 && m.average_window[0] <= m.average_window[1]) {
            return bad("metrics need a positive threshold and window and an ordered average window".into());
        }
        self.graph.build(self.n).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        self.delays.validate(self.n).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        Ok(())
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::table2().validate().unwrap();
        ScenarioConfig::table2_complete().validate().unwrap();
        ScenarioConfig::table2_embodied().validate().unwrap();
        assert_eq!(ScenarioConfig::table2().steps(), 1500);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig::table2_embodied();
        let back = ScenarioConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ScenarioConfig::table2();
        cfg.control_onset = 61.0;
        assert!(matches!(cfg.validate(), Err(HarnessError::ConfigInvalid(_))));

        let mut cfg = ScenarioConfig::table2();
        cfg.robots.pop();
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::table2();
        cfg.mode = Mode::Embodied;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::table2();
        cfg.graph = GraphSpec::Adjacency { matrix: vec![vec![0, 1], vec![1, 0]] };
        assert!(cfg.validate().is_err());

        let text = ScenarioConfig::table2().to_json_pretty().replace("\"k\": 0.5", "\"k\": -0.5");
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn axis_program_terms() {
        let p = AxisProgram { base: 0.11, sin: 0.0, omega: 0.0, omega_sin: 0.05 };
        let t = 1.3f64;
        assert_eq!(p.evaluate(t, 0.5), 0.11 + 0.05 * 0.5 * t.sin());
    }
}
