//! Object stiffness coupling and the distributed wrench-reduction law.
//!
//! Every robot measures its own wrench deviation, turns it into a Cartesian
//! correction through the inverse of the object stiffness, maps that into
//! joint space and mixes it with the (delayed) corrections broadcast by its
//! in-neighbours:
//!
//! `u_i = -k Σ_j a_ij [ f⁻¹(K⁻¹(h_i^ref - h_i)) - β f⁻¹(K⁻¹(h_j^ref - h_j)(t - τ_ij)) ]`

use nalgebra::{DVector, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comms::{CommGraph, CommsError, DelaySchedule, StateHistory};
use crate::kinematics::{damped_step, KinematicModel, KinematicsError, RigidPose};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("neighbour list does not match the graph row: {0}")]
    NeighborMismatch(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Comms(#[from] CommsError),
}

fn check_dim(expected: usize, v: &DVector<f64>) -> Result<(), ControlError> {
    if v.len() != expected {
        return Err(ControlError::DimMismatch { expected, got: v.len() });
    }
    Ok(())
}

/// Diagonal object stiffness `K` (N/m on force rows, N·m/rad on torque rows).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StiffnessModel {
    diag: DVector<f64>,
}

impl StiffnessModel {
    pub fn new(diag: Vec<f64>) -> Result<Self, ControlError> {
        if diag.is_empty() {
            return Err(ControlError::PreconditionViolation("stiffness needs at least one axis".into()));
        }
        if let Some(bad) = diag.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(ControlError::PreconditionViolation(format!(
                "stiffness entries must be positive, got {bad}"
            )));
        }
        Ok(Self { diag: DVector::from_vec(diag) })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &DVector<f64> {
        &self.diag
    }

    /// `K v`
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>, ControlError> {
        check_dim(self.dim(), v)?;
        Ok(self.diag.component_mul(v))
    }

    /// `K⁻¹ w`
    pub fn solve(&self, w: &DVector<f64>) -> Result<DVector<f64>, ControlError> {
        check_dim(self.dim(), w)?;
        Ok(w.component_div(&self.diag))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, ControlError> {
        Self::new(self.diag.iter().map(|k| k * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for StiffnessModel {
    type Error = ControlError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<StiffnessModel> for Vec<f64> {
    fn from(k: StiffnessModel) -> Self {
        k.diag.iter().copied().collect()
    }
}

/// Positive gains `k` and `β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGains")]
pub struct ControlGains {
    k: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct RawGains {
    k: f64,
    beta: f64,
}

impl TryFrom<RawGains> for ControlGains {
    type Error = ControlError;
    fn try_from(raw: RawGains) -> Result<Self, Self::Error> {
        Self::new(raw.k, raw.beta)
    }
}

impl ControlGains {
    pub fn new(k: f64, beta: f64) -> Result<Self, ControlError> {
        if !(k.is_finite() && k > 0.0 && beta.is_finite() && beta > 0.0) {
            return Err(ControlError::PreconditionViolation(format!(
                "gains must be positive (k = {k}, beta = {beta})"
            )));
        }
        Ok(Self { k, beta })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Per-robot tracking quantities in task space.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingState {
    pub e_ref: DVector<f64>,
    pub e: DVector<f64>,
    pub h_ref: DVector<f64>,
    pub h: DVector<f64>,
}

impl TrackingState {
    /// `Δe = e - e_ref`
    pub fn deviation(&self) -> DVector<f64> {
        &self.e - &self.e_ref
    }

    /// `h - h_ref`
    pub fn wrench_error(&self) -> DVector<f64> {
        &self.h - &self.h_ref
    }

    /// `h_ref - h`, the quantity each robot broadcasts.
    pub fn broadcast(&self) -> DVector<f64> {
        &self.h_ref - &self.h
    }

    pub fn correction_target(&self, stiffness: &StiffnessModel) -> Result<DVector<f64>, ControlError> {
        correction_target(stiffness, &self.h, &self.h_ref, &self.e)
    }

    /// Joint-space error `ξ = q - q_d` under the given correction map.
    pub fn joint_error(&self, stiffness: &StiffnessModel, map: &dyn CorrectionMap) -> Result<DVector<f64>, ControlError> {
        map.to_joint(&stiffness.solve(&self.broadcast())?)
    }
}

/// Wrench on robot `i` from the object spring:
/// `h_i = h_i^ref + K Σ_{j≠i} (Δe_j - Δe_i)`.
pub fn interaction_wrench(
    stiffness: &StiffnessModel,
    dev_self: &DVector<f64>,
    dev_others: &[DVector<f64>],
    h_ref: &DVector<f64>,
) -> Result<DVector<f64>, ControlError> {
    let d = stiffness.dim();
    check_dim(d, dev_self)?;
    check_dim(d, h_ref)?;
    let mut spread = DVector::zeros(d);
    for other in dev_others {
        check_dim(d, other)?;
        spread += other - dev_self;
    }
    Ok(h_ref + stiffness.apply(&spread)?)
}

/// Pose at which the measured wrench would equal its reference:
/// `e_d = e + K⁻¹ (h - h_ref)`.
pub fn correction_target(
    stiffness: &StiffnessModel,
    h: &DVector<f64>,
    h_ref: &DVector<f64>,
    e: &DVector<f64>,
) -> Result<DVector<f64>, ControlError> {
    check_dim(stiffness.dim(), h)?;
    check_dim(stiffness.dim(), h_ref)?;
    check_dim(stiffness.dim(), e)?;
    Ok(e + stiffness.solve(&(h - h_ref))?)
}

/// Maps a small Cartesian correction to the joint displacement producing it.
pub trait CorrectionMap {
    fn to_joint(&self, cartesian: &DVector<f64>) -> Result<DVector<f64>, ControlError>;
}

/// Planar abstraction: end-effectors are driven directly in task space.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityMap;

impl CorrectionMap for IdentityMap {
    fn to_joint(&self, cartesian: &DVector<f64>) -> Result<DVector<f64>, ControlError> {
        Ok(cartesian.clone())
    }
}

/// One damped least-squares step of the arm about its current
/// configuration.
#[derive(Clone, Debug)]
pub struct ArmCorrection<'a> {
    pub model: &'a KinematicModel,
    pub base_pose: RigidPose,
    pub arm: nalgebra::Vector6<f64>,
    pub damping: f64,
    pub max_step: f64,
}

impl CorrectionMap for ArmCorrection<'_> {
    fn to_joint(&self, cartesian: &DVector<f64>) -> Result<DVector<f64>, ControlError> {
        check_dim(6, cartesian)?;
        let jac = self.model.arm_jacobian_from(&self.base_pose, &self.arm);
        let target = Vector6::from_column_slice(cartesian.as_slice());
        let step = damped_step(&jac, &target, self.damping)
            .ok_or(KinematicsError::NearSingular { step_norm: f64::INFINITY })?;
        let norm = step.norm();
        if !(norm <= self.max_step) {
            return Err(KinematicsError::NearSingular { step_norm: norm }.into());
        }
        Ok(DVector::from_column_slice(step.as_slice()))
    }
}

fn check_neighbors(graph_row: &[f64], neighbors: &[(usize, DVector<f64>)]) -> Result<(), ControlError> {
    let expected: Vec<usize> = graph_row
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(j, _)| j)
        .collect();
    let given: Vec<usize> = neighbors.iter().map(|(j, _)| *j).collect();
    if expected != given {
        return Err(ControlError::NeighborMismatch(format!("graph row has {expected:?}, got {given:?}")));
    }
    Ok(())
}

/// Joint-space form of the law: `u_i = -k Σ_j a_ij (ξ_i - β ξ_j(t - τ_ij))`.
///
/// `delayed_xi` holds `(j, ξ_j)` for every `j` with `a_ij ≠ 0`, in index order.
pub fn control_input_joint(
    xi: &DVector<f64>,
    delayed_xi: &[(usize, DVector<f64>)],
    gains: &ControlGains,
    graph_row: &[f64],
) -> Result<DVector<f64>, ControlError> {
    check_neighbors(graph_row, delayed_xi)?;
    let mut sum = DVector::zeros(xi.len());
    for (j, xj) in delayed_xi {
        check_dim(xi.len(), xj)?;
        sum += (xi - xj * gains.beta) * graph_row[*j];
    }
    Ok(sum * -gains.k)
}

/// The law as computed on the robot: `own` and each neighbour payload are
/// wrench deviations `h_ref - h`; the delayed neighbour payloads come from
/// [`crate::comms::receive_delayed`].
pub fn control_input(
    own: &DVector<f64>,
    neighbors: &[(usize, DVector<f64>)],
    gains: &ControlGains,
    graph_row: &[f64],
    stiffness: &StiffnessModel,
    map: &dyn CorrectionMap,
) -> Result<DVector<f64>, ControlError> {
    check_neighbors(graph_row, neighbors)?;
    let xi = map.to_joint(&stiffness.solve(own)?)?;
    let mut delayed = Vec::with_capacity(neighbors.len());
    for (j, payload) in neighbors {
        delayed.push((*j, map.to_joint(&stiffness.solve(payload)?)?));
    }
    control_input_joint(&xi, &delayed, gains, graph_row)
}

/// Comparison controller: a follower regulates toward the leader's error
/// only, `u_i = -k (ξ_i - β ξ_leader)`.
pub fn leader_follower_input(xi: &DVector<f64>, xi_leader: &DVector<f64>, gains: &ControlGains) -> Result<DVector<f64>, ControlError> {
    check_dim(xi.len(), xi_leader)?;
    Ok((xi - xi_leader * gains.beta) * -gains.k)
}

/// Closed-loop joint error dynamics
/// `ξ̇_i = -k Σ_j a_ij ξ_i + kβ Σ_j a_ij ξ_j(t - τ_ij)`, integrated with
/// explicit Euler. The broadcast log starts with the initial errors, which
/// also pad every lookup before `t = 0`.
#[derive(Clone, Debug)]
pub struct ErrorDynamics {
    graph: CommGraph,
    delays: DelaySchedule,
    gains: ControlGains,
    dt: f64,
    t: f64,
    xi: Vec<DVector<f64>>,
    history: StateHistory,
    rng: ChaCha8Rng,
}

impl ErrorDynamics {
    pub fn new(
        graph: CommGraph,
        delays: DelaySchedule,
        gains: ControlGains,
        dt: f64,
        initial: Vec<DVector<f64>>,
        seed: u64,
    ) -> Result<Self, ControlError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ControlError::PreconditionViolation(format!("dt must be positive, got {dt}")));
        }
        if initial.len() != graph.n() {
            return Err(ControlError::DimMismatch { expected: graph.n(), got: initial.len() });
        }
        let dim = initial.first().map_or(0, |x| x.len());
        for x in &initial {
            check_dim(dim, x)?;
        }
        delays.validate(graph.n())?;
        let mut history = StateHistory::new(initial.clone());
        for (i, x) in initial.iter().enumerate() {
            history.publish(i, 0.0, x.clone())?;
        }
        Ok(Self {
            graph,
            delays,
            gains,
            dt,
            t: 0.0,
            xi: initial,
            history,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn errors(&self) -> &[DVector<f64>] {
        &self.xi
    }

    pub fn history(&self) -> &StateHistory {
        &self.history
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    /// Advances one period and returns the new errors.
    pub fn step(&mut self) -> Result<&[DVector<f64>], ControlError> {
        let n = self.graph.n();
        let snapshot = self.delays.sample(n, self.t, &mut self.rng);
        let (k, beta) = (self.gains.k, self.gains.beta);
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut rate = &self.xi[i] * (-k * self.graph.in_degree(i) as f64);
            for j in self.graph.in_neighbors(i) {
                let got = crate::comms::receive_delayed(&self.history, &self.graph, &snapshot, i, j, self.t)?;
                rate += got.payload * (k * beta);
            }
            next.push(&self.xi[i] + rate * self.dt);
        }
        self.xi = next;
        self.t += self.dt;
        // step count times dt keeps the sample grid free of accumulated drift
        let stamp = (self.t / self.dt).round() * self.dt;
        self.t = stamp;
        for (i, x) in self.xi.iter().enumerate() {
            self.history.publish(i, stamp, x.clone())?;
        }
        Ok(&self.xi)
    }
}
