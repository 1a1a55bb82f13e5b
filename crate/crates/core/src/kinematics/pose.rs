use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::KinematicsError;

/// Tolerance used when accepting a user supplied rotation matrix.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rigid transform between two frames.
///
/// Composition follows the usual convention: `a.compose(&b)` maps points
/// expressed in the frame of `b` into the parent frame of `a`, so the world
/// pose of an end-effector is `world_platform * platform_base * base_tool`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidPose {
    iso: Isometry3<f64>,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            iso: Isometry3::identity(),
        }
    }

    /// Builds a pose from a rotation matrix and translation, rejecting
    /// matrices that are not proper rotations.
    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, KinematicsError> {
        check_rotation(&rotation)?;
        let rot = UnitQuaternion::from_matrix_eps(&rotation, 1e-15, 100, UnitQuaternion::identity());
        Ok(Self {
            iso: Isometry3::from_parts(Translation3::from(translation), rot),
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            iso: Isometry3::translation(translation.x, translation.y, translation.z),
        }
    }

    /// Fixed-axis roll/pitch/yaw (applied x, then y, then z) plus translation.
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self {
            iso: Isometry3::from_parts(
                Translation3::new(xyz[0], xyz[1], xyz[2]),
                UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
            ),
        }
    }

    /// Rotation of `angle` about a unit `axis`, no translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let unit = nalgebra::Unit::new_normalize(*axis);
        Self {
            iso: Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&unit, angle),
            ),
        }
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::z(), angle)
    }

    /// Pose of an omnidirectional platform at `(x, y)` with heading `alpha`.
    pub fn planar(x: f64, y: f64, alpha: f64) -> Self {
        Self::from_xyz_rpy([x, y, 0.0], [0.0, 0.0, alpha])
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.iso.translation = Translation3::from(translation);
        self
    }

    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        let mut iso = self.iso * other.iso;
        iso.rotation.renormalize_fast();
        RigidPose { iso }
    }

    pub fn inverse(&self) -> RigidPose {
        RigidPose {
            iso: self.iso.inverse(),
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.iso.rotation.to_rotation_matrix().into_inner()
    }

    pub fn rotation3(&self) -> Rotation3<f64> {
        self.iso.rotation.to_rotation_matrix()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.iso.translation.vector
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.iso.rotation * p + self.iso.translation.vector
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.iso.rotation * v
    }

    pub fn to_homogeneous(&self) -> nalgebra::Matrix4<f64> {
        self.iso.to_homogeneous()
    }

    pub fn isometry(&self) -> &Isometry3<f64> {
        &self.iso
    }

    /// World-frame difference `self ⊖ other`: translation difference stacked
    /// over the rotation vector of `R_self * R_otherᵀ`.
    pub fn difference(&self, other: &RigidPose) -> Vector6<f64> {
        let dp = self.translation() - other.translation();
        let dr = (self.iso.rotation * other.iso.rotation.inverse()).scaled_axis();
        Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
    }

    /// Translation error norm plus rotation-logarithm norm.
    pub fn distance(&self, other: &RigidPose) -> f64 {
        let d = self.difference(other);
        d.fixed_rows::<3>(0).norm() + d.fixed_rows::<3>(3).norm()
    }
}

pub fn compose_frames(a: &RigidPose, b: &RigidPose) -> RigidPose {
    a.compose(b)
}

pub(crate) fn check_rotation(r: &Matrix3<f64>) -> Result<(), KinematicsError> {
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if !err.is_finite() || err > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
        return Err(KinematicsError::NotARotation { orthogonality: err, determinant: det });
    }
    Ok(())
}

/// Serializable `{xyz, rpy}` description used in model files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseSpec {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl From<PoseSpec> for RigidPose {
    fn from(spec: PoseSpec) -> Self {
        RigidPose::from_xyz_rpy(spec.xyz, spec.rpy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn assert_pose_close(a: &RigidPose, b: &RigidPose, tol: f64) {
        let dr = (a.rotation() - b.rotation()).abs().max();
        let dt = (a.translation() - b.translation()).abs().max();
        assert!(dr < tol && dt < tol, "rotation diff {dr}, translation diff {dt}");
    }

    #[test]
    fn identity_is_neutral() {
        let x = RigidPose::from_xyz_rpy([0.3, -1.0, 2.0], [0.1, 0.2, -0.7]);
        assert_pose_close(&compose_frames(&RigidPose::identity(), &x), &x, 1e-15);
        assert_pose_close(&compose_frames(&x, &RigidPose::identity()), &x, 1e-15);
    }

    #[test]
    fn quarter_turns_compose_by_hand() {
        let a = RigidPose::rot_z(FRAC_PI_2).with_translation(Vector3::new(1.0, 0.0, 0.0));
        let c = compose_frames(&a, &a);
        let expected = RigidPose::rot_z(std::f64::consts::PI).with_translation(Vector3::new(1.0, 1.0, 0.0));
        assert_pose_close(&c, &expected, 1e-12);
    }

    #[test]
    fn inverse_cancels() {
        let x = RigidPose::from_xyz_rpy([0.3, -1.0, 2.0], [0.4, -1.2, 2.9]);
        assert_pose_close(&x.compose(&x.inverse()), &RigidPose::identity(), 1e-12);
    }

    #[test]
    fn rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(matches!(
            RigidPose::from_parts(m, Vector3::zeros()),
            Err(KinematicsError::NotARotation { .. })
        ));
        let sheared = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidPose::from_parts(sheared, Vector3::zeros()).is_err());
    }

    #[test]
    fn difference_of_equal_poses_is_zero() {
        let x = RigidPose::from_xyz_rpy([1.0, 2.0, 3.0], [0.5, 0.1, 0.2]);
        assert!(x.difference(&x).norm() < 1e-15);
        assert!(x.distance(&x) < 1e-15);
    }
}
