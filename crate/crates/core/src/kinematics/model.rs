use std::path::Path;

use nalgebra::{SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::pose::{PoseSpec, RigidPose};
use super::KinematicsError;

pub const ARM_DOF: usize = 6;
pub const PLATFORM_DOF: usize = 3;

/// One revolute joint of the serial arm: a fixed transform from the previous
/// joint frame followed by a rotation about `axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub origin: PoseSpec,
    pub axis: [f64; 3],
    /// Lower and upper joint limit (rad).
    pub limits: [f64; 2],
}

/// On-disk description of a mobile manipulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default)]
    pub name: String,
    /// Arm base relative to the platform frame.
    pub mount: PoseSpec,
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub tool: PoseSpec,
    /// A well-conditioned working configuration.
    #[serde(default)]
    pub home: Option<[f64; ARM_DOF]>,
}

#[derive(Clone, Debug)]
struct Joint {
    origin: RigidPose,
    axis: Vector3<f64>,
    limits: (f64, f64),
}

/// 3-DOF omnidirectional platform carrying a 6R arm.
#[derive(Clone, Debug)]
pub struct KinematicModel {
    name: String,
    mount: RigidPose,
    joints: Vec<Joint>,
    tool: RigidPose,
    home: Vector6<f64>,
}

/// Full configuration: platform `(x, y, heading)` and the six arm joints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub platform: Vector3<f64>,
    pub arm: Vector6<f64>,
}

impl RobotConfig {
    pub fn new(platform: Vector3<f64>, arm: Vector6<f64>) -> Self {
        Self { platform, arm }
    }

    pub fn platform_pose(&self) -> RigidPose {
        RigidPose::planar(self.platform.x, self.platform.y, self.platform.z)
    }
}

/// 6×9 Jacobian `[J_p | J]`: three platform columns followed by six arm
/// columns. Rows are world-frame linear velocity then angular velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianMatrix(pub SMatrix<f64, 6, 9>);

impl JacobianMatrix {
    pub fn platform_block(&self) -> SMatrix<f64, 6, 3> {
        self.0.fixed_columns::<PLATFORM_DOF>(0).into_owned()
    }

    pub fn arm_block(&self) -> SMatrix<f64, 6, 6> {
        self.0.fixed_columns::<ARM_DOF>(PLATFORM_DOF).into_owned()
    }

    pub fn matrix(&self) -> &SMatrix<f64, 6, 9> {
        &self.0
    }
}

impl KinematicModel {
    pub fn from_file_spec(spec: ModelFile) -> Result<Self, KinematicsError> {
        if spec.joints.len() != ARM_DOF {
            return Err(KinematicsError::InvalidModel(format!(
                "expected {ARM_DOF} joints, found {}",
                spec.joints.len()
            )));
        }
        let mut joints = Vec::with_capacity(ARM_DOF);
        for (i, j) in spec.joints.iter().enumerate() {
            let axis = Vector3::from(j.axis);
            let norm = axis.norm();
            if !(norm.is_finite() && norm > 1e-12) {
                return Err(KinematicsError::InvalidModel(format!("joint {i} has a zero axis")));
            }
            if !(j.limits[0] < j.limits[1]) {
                return Err(KinematicsError::InvalidModel(format!("joint {i} has empty limits")));
            }
            joints.push(Joint {
                origin: j.origin.into(),
                axis: axis / norm,
                limits: (j.limits[0], j.limits[1]),
            });
        }
        let home = Vector6::from(spec.home.unwrap_or([0.0; ARM_DOF]));
        let model = Self {
            name: spec.name,
            mount: spec.mount.into(),
            joints,
            tool: spec.tool.into(),
            home,
        };
        model.check_limits(&home)?;
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self, KinematicsError> {
        let spec: ModelFile = serde_json::from_str(text).map_err(|e| KinematicsError::Parse(e.to_string()))?;
        Self::from_file_spec(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KinematicsError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| KinematicsError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// Built-in approximation of a 7 kg-class collaborative 6R arm (UR-style
    /// geometry, ~0.8 m reach) on a platform mount 0.5 m above the floor.
    /// The numbers are not vendor data.
    pub fn approximate_cobot() -> Self {
        Self::from_json(include_str!("../../../../configs/cobot_approx.json"))
            .expect("bundled model file is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mount_offset(&self) -> &RigidPose {
        &self.mount
    }

    pub(crate) fn first_joint_origin(&self) -> &RigidPose {
        &self.joints[0].origin
    }

    pub fn home(&self) -> Vector6<f64> {
        self.home
    }

    pub fn limits(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.joints.iter().map(|j| j.limits)
    }

    /// Upper bound on the distance from the first joint axis origin to the
    /// tool frame.
    pub fn reach(&self) -> f64 {
        self.joints.iter().skip(1).map(|j| j.origin.translation().norm()).sum::<f64>()
            + self.tool.translation().norm()
    }

    pub fn check_limits(&self, arm: &Vector6<f64>) -> Result<(), KinematicsError> {
        for (i, (q, joint)) in arm.iter().zip(&self.joints).enumerate() {
            let (lo, hi) = joint.limits;
            if !(q.is_finite() && *q >= lo && *q <= hi) {
                return Err(KinematicsError::JointLimit { joint: i, value: *q, lower: lo, upper: hi });
            }
        }
        Ok(())
    }

    /// Frames of every joint (after its fixed origin, before its rotation)
    /// plus the tool frame, all relative to `base`.
    fn chain_frames(&self, base: &RigidPose, arm: &Vector6<f64>) -> ([RigidPose; ARM_DOF], RigidPose) {
        let mut frames = [RigidPose::identity(); ARM_DOF];
        let mut current = *base;
        for (k, joint) in self.joints.iter().enumerate() {
            current = current.compose(&joint.origin);
            frames[k] = current;
            current = current.compose(&RigidPose::from_axis_angle(&joint.axis, arm[k]));
        }
        (frames, current.compose(&self.tool))
    }

    /// Arm base pose in the world for a given platform configuration.
    pub fn base_pose(&self, platform: &Vector3<f64>) -> RigidPose {
        RigidPose::planar(platform.x, platform.y, platform.z).compose(&self.mount)
    }

    /// Tool pose relative to an arbitrary arm base pose, without limit checks.
    pub fn arm_pose_from(&self, base: &RigidPose, arm: &Vector6<f64>) -> RigidPose {
        self.chain_frames(base, arm).1
    }

    /// Arm block of the Jacobian relative to an arbitrary base pose.
    pub fn arm_jacobian_from(&self, base: &RigidPose, arm: &Vector6<f64>) -> SMatrix<f64, 6, 6> {
        let (frames, tool) = self.chain_frames(base, arm);
        let p_e = tool.translation();
        let mut jac = SMatrix::<f64, 6, 6>::zeros();
        for (k, (frame, joint)) in frames.iter().zip(&self.joints).enumerate() {
            let w = frame.rotate(&joint.axis);
            let v = w.cross(&(p_e - frame.translation()));
            jac.fixed_view_mut::<3, 1>(0, k).copy_from(&v);
            jac.fixed_view_mut::<3, 1>(3, k).copy_from(&w);
        }
        jac
    }
}

/// World pose of the end-effector: platform, then mount offset, then arm chain.
pub fn forward_kinematics(model: &KinematicModel, config: &RobotConfig) -> Result<RigidPose, KinematicsError> {
    model.check_limits(&config.arm)?;
    Ok(model.arm_pose_from(&model.base_pose(&config.platform), &config.arm))
}

pub fn jacobian(model: &KinematicModel, config: &RobotConfig) -> Result<JacobianMatrix, KinematicsError> {
    model.check_limits(&config.arm)?;
    let base = model.base_pose(&config.platform);
    let arm = model.arm_jacobian_from(&base, &config.arm);
    let p_e = model.arm_pose_from(&base, &config.arm).translation();
    let r = p_e - Vector3::new(config.platform.x, config.platform.y, 0.0);

    let mut full = SMatrix::<f64, 6, 9>::zeros();
    full[(0, 0)] = 1.0;
    full[(1, 1)] = 1.0;
    // heading: rotation about world z through the platform origin
    let z = Vector3::z();
    full.fixed_view_mut::<3, 1>(0, 2).copy_from(&z.cross(&r));
    full.fixed_view_mut::<3, 1>(3, 2).copy_from(&z);
    full.fixed_view_mut::<6, 6>(0, PLATFORM_DOF).copy_from(&arm);
    Ok(JacobianMatrix(full))
}
