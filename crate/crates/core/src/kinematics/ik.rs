use nalgebra::{Matrix6, SMatrix, Vector6};

use super::model::KinematicModel;
use super::pose::RigidPose;
use super::KinematicsError;

/// Damped least-squares settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IkOptions {
    pub damping: f64,
    pub max_iterations: usize,
    /// Translation norm (m) plus rotation-log norm (rad).
    pub tolerance: f64,
    /// A single joint step larger than this (rad) is treated as a sign of a
    /// near-singular configuration.
    pub max_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            max_iterations: 100,
            tolerance: 1e-8,
            max_step: 0.5,
        }
    }
}

/// `Jᵀ (J Jᵀ + λ² I)⁻¹ e`
pub fn damped_step(jac: &SMatrix<f64, 6, 6>, error: &Vector6<f64>, damping: f64) -> Option<Vector6<f64>> {
    let jjt = jac * jac.transpose() + Matrix6::identity() * (damping * damping);
    let y = jjt.cholesky()?.solve(error);
    Some(jac.transpose() * y)
}

/// Solves for arm joints placing the tool at `target` given the world pose
/// of the arm base. The iteration starts at `seed` so small corrections stay
/// on the seed's solution branch.
pub fn inverse_kinematics_arm(
    model: &KinematicModel,
    base_pose: &RigidPose,
    target: &RigidPose,
    seed: &Vector6<f64>,
    options: &IkOptions,
) -> Result<Vector6<f64>, KinematicsError> {
    model.check_limits(seed)?;

    let shoulder = base_pose.compose(model.first_joint_origin()).translation();
    let distance = (target.translation() - shoulder).norm();
    if distance > model.reach() {
        return Err(KinematicsError::Unreachable {
            iterations: 0,
            residual: distance - model.reach(),
        });
    }

    let mut q = *seed;
    let mut residual = f64::INFINITY;
    for iteration in 0..=options.max_iterations {
        let current = model.arm_pose_from(base_pose, &q);
        residual = target.distance(&current);
        if residual < options.tolerance {
            model.check_limits(&q)?;
            return Ok(q);
        }
        if iteration == options.max_iterations {
            break;
        }
        let error = target.difference(&current);
        let jac = model.arm_jacobian_from(base_pose, &q);
        let step = damped_step(&jac, &error, options.damping)
            .ok_or(KinematicsError::NearSingular { step_norm: f64::INFINITY })?;
        let step_norm = step.norm();
        if !(step_norm <= options.max_step) {
            return Err(KinematicsError::NearSingular { step_norm });
        }
        q += step;
    }
    Err(KinematicsError::Unreachable {
        iterations: options.max_iterations,
        residual,
    })
}
