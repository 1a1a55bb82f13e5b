use nalgebra::{DVector, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ControllerKind, Mode, ScenarioConfig};
use super::HarnessError;
use crate::comms::{receive_delayed, CommGraph, StateHistory};
use crate::control::{
    control_input, interaction_wrench, leader_follower_input, ArmCorrection, CorrectionMap, IdentityMap,
};
use crate::kinematics::KinematicModel;
use crate::stability::{find_certificate, lyapunov_value, window_from_history, LyapunovSample, DELAY_TOLERANCE};

const DISTURBANCE_STREAM: u64 = 1;
const DELAY_STREAM: u64 = 2;
const ARM_DAMPING: f64 = 1e-3;
const ARM_MAX_STEP: f64 = 10.0;
const ONSET_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotRecord {
    /// Planar: end-effector position. Embodied: end-effector position
    /// followed by its rotation vector.
    pub e: Vec<f64>,
    /// Deviation from the reference trajectory.
    pub de: Vec<f64>,
    pub h: Vec<f64>,
    pub h_ref: Vec<f64>,
    /// Correction applied this step (task space when planar, arm joint
    /// rates when embodied).
    pub u: Vec<f64>,
    /// `‖h - h_ref‖`
    pub err_norm: f64,
}

impl RobotRecord {
    pub fn wrench_error(&self) -> Vec<f64> {
        self.h.iter().zip(&self.h_ref).map(|(h, r)| h - r).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub robots: Vec<RobotRecord>,
    /// Largest robot error norm at this step.
    pub max_error: f64,
    #[serde(default)]
    pub lyapunov: Option<LyapunovSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub mode: Mode,
    pub n: usize,
    pub dim: usize,
    pub dt: f64,
    pub onset: f64,
    pub records: Vec<StepRecord>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl TimeSeries {
    pub fn empty(mode: Mode, n: usize, dt: f64, onset: f64) -> Self {
        let dim = match mode {
            Mode::Planar => 2,
            Mode::Embodied => 6,
        };
        Self { mode, n, dim, dt, onset, records: Vec::new(), warnings: Vec::new() }
    }

    /// Series carrying only the max-error trace `norms[m]` at `t = m·dt`,
    /// for exercising the metrics.
    pub fn from_error_norms(dt: f64, onset: f64, norms: &[f64]) -> Self {
        let mut s = Self::empty(Mode::Planar, 1, dt, onset);
        s.records = norms
            .iter()
            .enumerate()
            .map(|(m, &e)| StepRecord {
                t: m as f64 * dt,
                robots: vec![RobotRecord {
                    e: vec![0.0; 2],
                    de: vec![0.0; 2],
                    h: vec![e, 0.0],
                    h_ref: vec![0.0; 2],
                    u: vec![0.0; 2],
                    err_norm: e,
                }],
                max_error: e,
                lyapunov: None,
            })
            .collect();
        s
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.t)
    }

    pub fn max_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.max_error)
    }
}

enum Bodies {
    Planar {
        e: Vec<DVector<f64>>,
        e_ref: Vec<DVector<f64>>,
    },
    Embodied {
        model: KinematicModel,
        platform: Vec<Vector3<f64>>,
        platform_ref: Vec<Vector3<f64>>,
        arm: Vec<Vector6<f64>>,
    },
}

impl Bodies {
    fn new(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        Ok(match cfg.mode {
            Mode::Planar => {
                let e: Vec<DVector<f64>> = cfg.robots.iter().map(|r| DVector::from_column_slice(&r.initial)).collect();
                Bodies::Planar { e_ref: e.clone(), e }
            }
            Mode::Embodied => {
                let model = cfg.load_model()?;
                let platform: Vec<Vector3<f64>> = cfg.robots.iter().map(|r| Vector3::from_column_slice(&r.initial)).collect();
                let arm = vec![model.home(); cfg.n];
                Bodies::Embodied { model, platform_ref: platform.clone(), platform, arm }
            }
        })
    }

    /// Current task-space pose and deviation of every robot.
    fn poses(&self) -> Vec<(DVector<f64>, DVector<f64>)> {
        match self {
            Bodies::Planar { e, e_ref } => e.iter().zip(e_ref).map(|(e, r)| (e.clone(), e - r)).collect(),
            Bodies::Embodied { model, platform, platform_ref, arm } => {
                let home = model.home();
                (0..platform.len())
                    .map(|i| {
                        let pose = model.arm_pose_from(&model.base_pose(&platform[i]), &arm[i]);
                        let reference = model.arm_pose_from(&model.base_pose(&platform_ref[i]), &home);
                        let p = pose.translation();
                        let w = pose.rotation3().scaled_axis();
                        let e = DVector::from_column_slice(&[p.x, p.y, p.z, w.x, w.y, w.z]);
                        let de = DVector::from_column_slice(pose.difference(&reference).as_slice());
                        (e, de)
                    })
                    .collect()
            }
        }
    }

    fn correction_map(&self, i: usize) -> Box<dyn CorrectionMap + '_> {
        match self {
            Bodies::Planar { .. } => Box::new(IdentityMap),
            Bodies::Embodied { model, platform, arm, .. } => Box::new(ArmCorrection {
                model,
                base_pose: model.base_pose(&platform[i]),
                arm: arm[i],
                damping: ARM_DAMPING,
                max_step: ARM_MAX_STEP,
            }),
        }
    }

    fn integrate(&mut self, velocity: &[[f64; 2]], reference: &[[f64; 2]], u: &[DVector<f64>], dt: f64) {
        match self {
            Bodies::Planar { e, e_ref } => {
                for i in 0..e.len() {
                    let v = DVector::from_column_slice(&velocity[i]);
                    e[i] += (v + &u[i]) * dt;
                    e_ref[i] += DVector::from_column_slice(&reference[i]) * dt;
                }
            }
            Bodies::Embodied { platform, platform_ref, arm, .. } => {
                for i in 0..platform.len() {
                    platform[i] += Vector3::new(velocity[i][0], velocity[i][1], 0.0) * dt;
                    platform_ref[i] += Vector3::new(reference[i][0], reference[i][1], 0.0) * dt;
                    arm[i] += Vector6::from_column_slice(u[i].as_slice()) * dt;
                }
            }
        }
    }
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Simulates the scenario on a single clock. Each step computes wrenches
/// from the current poses, broadcasts `h_ref - h`, samples the link
/// delays, forms the corrections from delayed neighbour data and then
/// integrates the disturbed velocities plus corrections.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<TimeSeries, HarnessError> {
    cfg.validate()?;
    let n = cfg.n;
    let dim = cfg.task_dim();
    let graph: CommGraph = cfg.graph.build(n).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
    let mut series = TimeSeries::empty(cfg.mode, n, cfg.dt, cfg.control_onset);

    let certified_tau = if cfg.delays.bound > 0.0 { cfg.delays.bound } else { DELAY_TOLERANCE };
    let certificate = find_certificate(cfg.gains.k(), cfg.gains.beta(), n, certified_tau)
        .ok()
        .and_then(|r| r.certificate().copied());
    if cfg.controller == ControllerKind::Proposed && certificate.is_none() {
        series.warnings.push(format!(
            "gains k = {}, beta = {} are not certified for {n} robots with delay bound {} s",
            cfg.gains.k(),
            cfg.gains.beta(),
            cfg.delays.bound
        ));
    }
    if cfg.record_lyapunov && certificate.is_none() {
        series.warnings.push("Lyapunov recording skipped: no certificate for these gains".into());
    }

    let mut disturbance_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    disturbance_rng.set_stream(DISTURBANCE_STREAM);
    let mut delay_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    delay_rng.set_stream(DELAY_STREAM);

    let h_ref: Vec<DVector<f64>> = cfg
        .robots
        .iter()
        .map(|r| r.h_ref.as_ref().map_or_else(|| DVector::zeros(dim), |h| DVector::from_column_slice(h)))
        .collect();
    let reference: Vec<[f64; 2]> = cfg.robots.iter().map(|r| r.reference_velocity).collect();

    let mut bodies = Bodies::new(cfg)?;
    let mut history: Option<StateHistory> = None;
    let mut xi_history: Option<StateHistory> = None;
    let steps = cfg.steps();
    series.records.reserve(steps + 1);

    for s in 0..=steps {
        let t = s as f64 * cfg.dt;
        let poses = bodies.poses();
        let mut h = Vec::with_capacity(n);
        for i in 0..n {
            let others: Vec<DVector<f64>> = (0..n).filter(|&j| j != i).map(|j| poses[j].1.clone()).collect();
            h.push(interaction_wrench(&cfg.stiffness, &poses[i].1, &others, &h_ref[i])?);
        }
        let payload: Vec<DVector<f64>> = (0..n).map(|i| &h_ref[i] - &h[i]).collect();
        let history = history.get_or_insert_with(|| StateHistory::new(payload.clone()));
        for (i, p) in payload.iter().enumerate() {
            history.publish(i, t, p.clone())?;
        }
        let snapshot = cfg.delays.sample(n, t, &mut delay_rng);

        let mut velocity = Vec::with_capacity(n);
        for r in &cfg.robots {
            let ox: f64 = disturbance_rng.gen_range(-1.0..1.0);
            let oy: f64 = disturbance_rng.gen_range(-1.0..1.0);
            velocity.push([r.velocity[0].evaluate(t, ox), r.velocity[1].evaluate(t, oy)]);
        }

        let active = t >= cfg.control_onset - ONSET_EPS;
        let mut u = vec![DVector::zeros(dim); n];
        if active {
            match cfg.controller {
                ControllerKind::Proposed => {
                    for (i, ui) in u.iter_mut().enumerate() {
                        let mut neighbors = Vec::new();
                        for j in graph.in_neighbors(i) {
                            let got = receive_delayed(history, &graph, &snapshot, i, j, t)?;
                            neighbors.push((j, got.payload.clone()));
                        }
                        let map = bodies.correction_map(i);
                        *ui = control_input(&payload[i], &neighbors, &cfg.gains, &graph.row(i), &cfg.stiffness, map.as_ref())?;
                    }
                }
                ControllerKind::LeaderFollower => {
                    let leader = cfg.leader;
                    for (i, ui) in u.iter_mut().enumerate() {
                        if i == leader {
                            continue;
                        }
                        let map = bodies.correction_map(i);
                        let xi = map.to_joint(&cfg.stiffness.solve(&payload[i])?)?;
                        let xl = map.to_joint(&cfg.stiffness.solve(&payload[leader])?)?;
                        *ui = leader_follower_input(&xi, &xl, &cfg.gains)?;
                    }
                }
                ControllerKind::None => {}
            }
        }

        let lyapunov = match (&certificate, cfg.record_lyapunov) {
            (Some(c), true) => {
                let mut xi = Vec::with_capacity(n);
                for (i, p) in payload.iter().enumerate() {
                    xi.push(bodies.correction_map(i).to_joint(&cfg.stiffness.solve(p)?)?);
                }
                let xh = xi_history.get_or_insert_with(|| StateHistory::new(xi.clone()));
                for (i, x) in xi.into_iter().enumerate() {
                    xh.publish(i, t, x)?;
                }
                let window = window_from_history(xh, t, c.tau, cfg.dt);
                Some(lyapunov_value(c.gamma, c.tau, &graph, &window).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?)
            }
            _ => None,
        };

        let robots: Vec<RobotRecord> = (0..n)
            .map(|i| RobotRecord {
                e: to_vec(&poses[i].0),
                de: to_vec(&poses[i].1),
                h: to_vec(&h[i]),
                h_ref: to_vec(&h_ref[i]),
                u: to_vec(&u[i]),
                err_norm: (&h[i] - &h_ref[i]).norm(),
            })
            .collect();
        let max_error = robots.iter().map(|r| r.err_norm).fold(0.0, f64::max);
        series.records.push(StepRecord { t, robots, max_error, lyapunov });

        if s < steps {
            bodies.integrate(&velocity, &reference, &u, cfg.dt);
        }
        if s % 250 == 249 {
            history.prune_before(t - cfg.delays.bound - 2.0 * cfg.dt);
            if let Some(xh) = xi_history.as_mut() {
                xh.prune_before(t - cfg.delays.bound - 2.0 * cfg.dt);
            }
        }
    }
    Ok(series)
}
