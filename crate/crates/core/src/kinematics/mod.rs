//! Frames, forward kinematics, Jacobians and arm inverse kinematics for an
//! omnidirectional platform carrying a six-joint serial arm.

mod ik;
mod model;
mod pose;

pub use ik::{damped_step, inverse_kinematics_arm, IkOptions};
pub use model::{
    forward_kinematics, jacobian, JacobianMatrix, JointSpec, KinematicModel, ModelFile, RobotConfig, ARM_DOF,
    PLATFORM_DOF,
};
pub use pose::{compose_frames, PoseSpec, RigidPose, ORTHONORMAL_TOL};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("matrix is not a proper rotation (orthogonality error {orthogonality:e}, det {determinant})")]
    NotARotation { orthogonality: f64, determinant: f64 },
    #[error("joint {joint} = {value} outside limits [{lower}, {upper}]")]
    JointLimit { joint: usize, value: f64, lower: f64, upper: f64 },
    #[error("target unreachable (residual {residual:e} after {iterations} iterations)")]
    Unreachable { iterations: usize, residual: f64 },
    #[error("near-singular configuration (damped step norm {step_norm})")]
    NearSingular { step_norm: f64 },
    #[error("invalid kinematic model: {0}")]
    InvalidModel(String),
    #[error("cannot parse model: {0}")]
    Parse(String),
    #[error("cannot read model: {0}")]
    Io(String),
}
