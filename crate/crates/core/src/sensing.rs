//! Force-torque sensing: frame transforms, drift and gripper-gravity
//! calibration, and the grasp matrix that sums robot wrenches on the object.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("need at least {needed} calibration samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("calibration orientations are degenerate (condition number {condition:e})")]
    DegenerateOrientations { condition: f64 },
    #[error("expected {expected} wrenches, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grasp map needs at least one grasp point")]
    EmptyGrasp,
    #[error("sample file: {0}")]
    SampleFile(String),
}

/// Force (N) and torque (N·m).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// In-plane force with zero torque.
    pub fn planar(fx: f64, fy: f64) -> Self {
        Self::new(Vector3::new(fx, fy, 0.0), Vector3::zeros())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|x| x.is_finite())
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.force + rhs.force, self.torque + rhs.torque)
    }
}

impl std::ops::Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.force - rhs.force, self.torque - rhs.torque)
    }
}

/// Sensor drift plus the gripper's weight and centre-of-mass offset, all in
/// the sensor frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SensorCalibration {
    pub drift_force: Vector3<f64>,
    pub drift_torque: Vector3<f64>,
    pub gripper_com_offset: Vector3<f64>,
    /// Gripper weight `mg` (N), never negative.
    pub gripper_weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationFit {
    pub calibration: SensorCalibration,
    pub residual_rms: f64,
    pub condition_number: f64,
}

/// Rotates a sensor-frame wrench into the world frame.
pub fn world_wrench(sensor_wrench: &Wrench, orientation: &Matrix3<f64>) -> Wrench {
    Wrench::new(orientation * sensor_wrench.force, orientation * sensor_wrench.torque)
}

/// Unit gravity direction seen in the sensor frame. World gravity points
/// along `-z`.
fn gravity_in_sensor(orientation: &Matrix3<f64>) -> Vector3<f64> {
    orientation.transpose() * Vector3::new(0.0, 0.0, -1.0)
}

/// What the sensor reports with nothing held: drift plus the gripper weight
/// acting at its centre of mass.
pub fn unloaded_reading(calib: &SensorCalibration, orientation: &Matrix3<f64>) -> Wrench {
    let weight = gravity_in_sensor(orientation) * calib.gripper_weight;
    Wrench::new(
        calib.drift_force + weight,
        calib.drift_torque + calib.gripper_com_offset.cross(&weight),
    )
}

/// Removes drift and gripper gravity from a raw sensor-frame reading.
pub fn compensate(raw: &Wrench, orientation: &Matrix3<f64>, calib: &SensorCalibration) -> Wrench {
    *raw - unloaded_reading(calib, orientation)
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

const CALIBRATION_PARAMS: usize = 10;
const MIN_CALIBRATION_SAMPLES: usize = 6;
const MAX_CONDITION: f64 = 1e8;

/// Least-squares fit of the ten calibration unknowns from unloaded samples
/// `(sensor orientation in world, sensor-frame reading)`.
///
/// Unknowns are `[f0; t0; mg; mg·p]`: force rows read `f = f0 + mg·g` and
/// torque rows `t = t0 - [g]× (mg·p)` where `g` is the sensor-frame gravity
/// direction, so the problem is linear.
pub fn calibrate_sensor(samples: &[(Matrix3<f64>, Wrench)]) -> Result<CalibrationFit, SensingError> {
    if samples.len() < MIN_CALIBRATION_SAMPLES {
        return Err(SensingError::InsufficientSamples {
            needed: MIN_CALIBRATION_SAMPLES,
            got: samples.len(),
        });
    }
    let rows = 6 * samples.len();
    let mut a = DMatrix::<f64>::zeros(rows, CALIBRATION_PARAMS);
    let mut b = DVector::<f64>::zeros(rows);
    for (s, (orientation, reading)) in samples.iter().enumerate() {
        let g = gravity_in_sensor(orientation);
        let r = 6 * s;
        a.view_mut((r, 0), (3, 3)).copy_from(&Matrix3::identity());
        a.view_mut((r, 6), (3, 1)).copy_from(&g);
        a.view_mut((r + 3, 3), (3, 3)).copy_from(&Matrix3::identity());
        a.view_mut((r + 3, 7), (3, 3)).copy_from(&(-skew(&g)));
        b.rows_mut(r, 6).copy_from(&reading.to_vector());
    }

    let sv = a.singular_values();
    let (smax, smin) = sv.iter().fold((0.0_f64, f64::INFINITY), |(hi, lo), s| (hi.max(*s), lo.min(*s)));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(SensingError::DegenerateOrientations { condition });
    }

    let x = (a.transpose() * &a)
        .cholesky()
        .ok_or(SensingError::DegenerateOrientations { condition })?
        .solve(&(a.transpose() * &b));

    let residual = &a * &x - &b;
    let residual_rms = (residual.norm_squared() / rows as f64).sqrt();

    let weight = x[6].max(0.0);
    let moment = Vector3::new(x[7], x[8], x[9]);
    let offset = if weight > 0.0 { moment / weight } else { Vector3::zeros() };
    Ok(CalibrationFit {
        calibration: SensorCalibration {
            drift_force: Vector3::new(x[0], x[1], x[2]),
            drift_torque: Vector3::new(x[3], x[4], x[5]),
            gripper_com_offset: offset,
            gripper_weight: weight,
        },
        residual_rms,
        condition_number: condition,
    })
}

/// Reads calibration samples from CSV with columns
/// `r11,r12,r13,r21,r22,r23,r31,r32,r33,fx,fy,fz,tx,ty,tz` (one header row).
pub fn read_calibration_samples(path: impl AsRef<Path>) -> Result<Vec<(Matrix3<f64>, Wrench)>, SensingError> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| SensingError::SampleFile(e.to_string()))?;
    parse_calibration_samples(file)
}

pub fn parse_calibration_samples(reader: impl std::io::Read) -> Result<Vec<(Matrix3<f64>, Wrench)>, SensingError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| SensingError::SampleFile(e.to_string()))?;
        if record.len() != 15 {
            return Err(SensingError::SampleFile(format!(
                "row {}: expected 15 columns, found {}",
                line + 1,
                record.len()
            )));
        }
        let mut v = [0.0; 15];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field
                .parse()
                .map_err(|e| SensingError::SampleFile(format!("row {}: {e}", line + 1)))?;
        }
        let r = Matrix3::from_row_slice(&v[..9]);
        let w = Wrench::new(Vector3::new(v[9], v[10], v[11]), Vector3::new(v[12], v[13], v[14]));
        out.push((r, w));
    }
    Ok(out)
}

/// Grasp point offsets `r_i` from the object centre of mass, world frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspMap {
    pub offsets: Vec<Vector3<f64>>,
}

impl GraspMap {
    pub fn new(offsets: Vec<Vector3<f64>>) -> Result<Self, SensingError> {
        if offsets.is_empty() {
            return Err(SensingError::EmptyGrasp);
        }
        Ok(Self { offsets })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// `G = [I₃ 0₃ … ; [r₁]× I₃ …]`, shape 6×6n.
pub fn grasp_matrix(map: &GraspMap) -> DMatrix<f64> {
    let n = map.offsets.len();
    let mut g = DMatrix::<f64>::zeros(6, 6 * n);
    for (i, r) in map.offsets.iter().enumerate() {
        let c = 6 * i;
        g.view_mut((0, c), (3, 3)).copy_from(&Matrix3::identity());
        g.view_mut((3, c), (3, 3)).copy_from(&skew(r));
        g.view_mut((3, c + 3), (3, 3)).copy_from(&Matrix3::identity());
    }
    g
}

/// Net wrench on the object, `h_o = -G [h_1; …; h_n]`.
pub fn object_wrench(map: &GraspMap, wrenches: &[Wrench]) -> Result<Wrench, SensingError> {
    if wrenches.len() != map.offsets.len() {
        return Err(SensingError::LengthMismatch {
            expected: map.offsets.len(),
            got: wrenches.len(),
        });
    }
    let mut stacked = DVector::<f64>::zeros(6 * wrenches.len());
    for (i, w) in wrenches.iter().enumerate() {
        stacked.rows_mut(6 * i, 6).copy_from(&w.to_vector());
    }
    let h = -(grasp_matrix(map) * stacked);
    Ok(Wrench::from_vector(&Vector6::from_column_slice(h.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn world_wrench_identity_and_half_turn() {
        let w = Wrench::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.0, 0.5, 2.0));
        assert_eq!(world_wrench(&w, &Matrix3::identity()), w);
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), PI).into_inner();
        let out = world_wrench(&w, &r);
        assert!((out.force - Vector3::new(-1.0, -2.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn unloaded_reading_by_hand() {
        let null = SensorCalibration::default();
        assert_eq!(unloaded_reading(&null, &Matrix3::identity()), Wrench::zero());

        let calib = SensorCalibration {
            gripper_weight: 10.0,
            gripper_com_offset: Vector3::new(0.0, 0.0, 0.05),
            ..Default::default()
        };
        let aligned = unloaded_reading(&calib, &Matrix3::identity());
        assert!((aligned.force - Vector3::new(0.0, 0.0, -10.0)).norm() < 1e-12);
        assert!(aligned.torque.norm() < 1e-12);

        let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), FRAC_PI_2).into_inner();
        let tilted = unloaded_reading(&calib, &rx);
        assert!((tilted.force - Vector3::new(0.0, -10.0, 0.0)).norm() < 1e-12);
        // (0, 0, 0.05) × (0, -10, 0)
        assert!((tilted.torque - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn compensation_cases() {
        let calib = SensorCalibration {
            drift_force: Vector3::new(0.3, -0.2, 0.1),
            drift_torque: Vector3::new(0.01, 0.02, -0.03),
            gripper_com_offset: Vector3::new(0.01, 0.0, 0.07),
            gripper_weight: 8.0,
        };
        let r = Rotation3::from_euler_angles(0.3, -0.5, 1.1).into_inner();
        let unloaded = unloaded_reading(&calib, &r);
        let residual = compensate(&unloaded, &r, &calib);
        assert!(residual.to_vector().norm() < 1e-14);

        let load = Wrench::new(Vector3::new(1.0, 2.0, -3.0), Vector3::new(0.1, 0.0, 0.2));
        let out = compensate(&(unloaded + load), &r, &calib);
        assert!((out.to_vector() - load.to_vector()).norm() < 1e-14);

        assert_eq!(compensate(&load, &r, &SensorCalibration::default()), load);
    }

    #[test]
    fn single_orientation_is_degenerate() {
        let calib = SensorCalibration { gripper_weight: 5.0, ..Default::default() };
        let samples: Vec<_> = (0..8)
            .map(|_| (Matrix3::identity(), unloaded_reading(&calib, &Matrix3::identity())))
            .collect();
        assert!(matches!(calibrate_sensor(&samples), Err(SensingError::DegenerateOrientations { .. })));
        assert!(matches!(
            calibrate_sensor(&samples[..3]),
            Err(SensingError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn grasp_matrix_blocks() {
        let single = GraspMap::new(vec![Vector3::zeros()]).unwrap();
        assert_eq!(grasp_matrix(&single), DMatrix::<f64>::identity(6, 6));

        let g = grasp_matrix(&GraspMap::new(vec![Vector3::new(1.0, 0.0, 0.0)]).unwrap());
        // [r]× for r = e_x, 1-based (2,3) = -1 and (3,2) = 1 within the torque block
        assert_eq!(g[(4, 2)], -1.0);
        assert_eq!(g[(5, 1)], 1.0);

        let three = GraspMap::new(vec![Vector3::zeros(); 3]).unwrap();
        assert_eq!(grasp_matrix(&three).shape(), (6, 18));
        assert!(GraspMap::new(vec![]).is_err());
    }

    #[test]
    fn object_wrench_cases() {
        let single = GraspMap::new(vec![Vector3::zeros()]).unwrap();
        let h = Wrench::new(Vector3::new(1.0, -2.0, 3.0), Vector3::new(0.5, 0.25, -1.0));
        let out = object_wrench(&single, &[h]).unwrap();
        assert_eq!(out.to_vector(), -h.to_vector());

        let pair = GraspMap::new(vec![Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, -1.0, 0.0)]).unwrap();
        let squeeze = [
            Wrench::new(Vector3::new(1.0, 0.0, 0.0), Vector3::zeros()),
            Wrench::new(Vector3::new(-1.0, 0.0, 0.0), Vector3::zeros()),
        ];
        let out = object_wrench(&pair, &squeeze).unwrap();
        assert!(out.force.norm() < 1e-15);
        assert!((out.torque - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-15);

        assert_eq!(object_wrench(&pair, &[Wrench::zero(); 2]).unwrap(), Wrench::zero());
        assert!(matches!(
            object_wrench(&pair, &[Wrench::zero()]),
            Err(SensingError::LengthMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn parses_sample_csv() {
        let text = "r11,r12,r13,r21,r22,r23,r31,r32,r33,fx,fy,fz,tx,ty,tz\n\
                    1,0,0,0,1,0,0,0,1,0.1,0.2,-9.8,0.0,0.01,0.0\n";
        let s = parse_calibration_samples(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].0, Matrix3::identity());
        assert_eq!(s[0].1.force.z, -9.8);
        assert!(parse_calibration_samples("a,b\n1,2\n".as_bytes()).is_err());
    }
}
