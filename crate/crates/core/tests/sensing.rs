use mmcoop::sensing::{
    calibrate_sensor, compensate, grasp_matrix, object_wrench, unloaded_reading, world_wrench, GraspMap,
    SensorCalibration, Wrench,
};
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn reference_calibration() -> SensorCalibration {
    SensorCalibration {
        drift_force: Vector3::new(0.42, -0.17, 1.3),
        drift_torque: Vector3::new(-0.021, 0.034, 0.008),
        gripper_com_offset: Vector3::new(0.004, -0.002, 0.061),
        gripper_weight: 9.81,
    }
}

fn spread_orientations(count: usize, rng: &mut ChaCha8Rng) -> Vec<Matrix3<f64>> {
    (0..count)
        .map(|_| {
            Rotation3::from_euler_angles(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-3.0..3.0),
            )
            .into_inner()
        })
        .collect()
}

#[test]
fn noiseless_calibration_is_recovered_exactly() {
    let truth = reference_calibration();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<_> = spread_orientations(12, &mut rng)
        .into_iter()
        .map(|r| (r, unloaded_reading(&truth, &r)))
        .collect();
    let fit = calibrate_sensor(&samples).unwrap();
    let c = fit.calibration;
    assert!(fit.residual_rms < 1e-10, "residual {}", fit.residual_rms);
    assert!((c.drift_force - truth.drift_force).norm() < 1e-10);
    assert!((c.drift_torque - truth.drift_torque).norm() < 1e-10);
    assert!((c.gripper_com_offset - truth.gripper_com_offset).norm() < 1e-10);
    assert!((c.gripper_weight - truth.gripper_weight).abs() < 1e-10);
}

#[test]
fn noisy_calibration_error_shrinks_with_samples() {
    let truth = reference_calibration();
    let sigma = 0.01;
    let samples_per_trial = 12;
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let trials = 100;
    let (mut f_sq, mut t_sq, mut w_sq) = (0.0, 0.0, 0.0);
    for _ in 0..trials {
        let samples: Vec<_> = spread_orientations(samples_per_trial, &mut rng)
            .into_iter()
            .map(|r| {
                let clean = unloaded_reading(&truth, &r);
                let jitter = Wrench::new(
                    Vector3::from_fn(|_, _| noise.sample(&mut rng)),
                    Vector3::from_fn(|_, _| noise.sample(&mut rng)),
                );
                (r, clean + jitter)
            })
            .collect();
        let c = calibrate_sensor(&samples).unwrap().calibration;
        f_sq += (c.drift_force - truth.drift_force).norm_squared() / 3.0;
        t_sq += (c.drift_torque - truth.drift_torque).norm_squared() / 3.0;
        w_sq += (c.gripper_weight - truth.gripper_weight).powi(2);
    }
    let bound = 5.0 * sigma / (samples_per_trial as f64).sqrt();
    for (name, sq) in [("drift force", f_sq), ("drift torque", t_sq), ("weight", w_sq)] {
        let rms = (sq / trials as f64).sqrt();
        assert!(rms < bound, "{name}: rms error {rms} >= {bound}");
    }
}

#[test]
fn world_wrench_matches_direct_multiplication() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for r in spread_orientations(50, &mut rng) {
        let w = Wrench::new(
            Vector3::new(rng.gen(), rng.gen(), rng.gen()),
            Vector3::new(rng.gen(), rng.gen(), rng.gen()),
        );
        let out = world_wrench(&w, &r);
        for i in 0..3 {
            let f: f64 = (0..3).map(|k| r[(i, k)] * w.force[k]).sum();
            let t: f64 = (0..3).map(|k| r[(i, k)] * w.torque[k]).sum();
            assert!((out.force[i] - f).abs() < 1e-14);
            assert!((out.torque[i] - t).abs() < 1e-14);
        }
    }
}

fn vec3() -> impl Strategy<Value = Vector3<f64>> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn wrench() -> impl Strategy<Value = Wrench> {
    (vec3(), vec3()).prop_map(|(f, t)| Wrench::new(f, t))
}

proptest! {
    #[test]
    fn compensation_cancels_unloaded_reading(
        roll in -3.1..3.1f64, pitch in -1.5..1.5f64, yaw in -3.1..3.1f64,
        df in vec3(), dt in vec3(), p in vec3(), mg in 0.0..50.0f64,
    ) {
        let r = Rotation3::from_euler_angles(roll, pitch, yaw).into_inner();
        let calib = SensorCalibration { drift_force: df, drift_torque: dt, gripper_com_offset: p, gripper_weight: mg };
        let out = compensate(&unloaded_reading(&calib, &r), &r, &calib);
        prop_assert!(out.to_vector().norm() < 1e-12);
    }

    #[test]
    fn grasp_torque_blocks_are_skew(offsets in prop::collection::vec(vec3(), 1..6)) {
        let g = grasp_matrix(&GraspMap::new(offsets.clone()).unwrap());
        for i in 0..offsets.len() {
            let block = g.view((3, 6 * i), (3, 3));
            prop_assert_eq!(block.transpose(), -block);
        }
    }

    #[test]
    fn object_wrench_is_linear(
        offsets in prop::collection::vec(vec3(), 3),
        a in prop::collection::vec(wrench(), 3),
        b in prop::collection::vec(wrench(), 3),
        s in -3.0..3.0f64,
    ) {
        let map = GraspMap::new(offsets).unwrap();
        let combined: Vec<Wrench> = a.iter().zip(&b)
            .map(|(x, y)| Wrench::from_vector(&(x.to_vector() * s + y.to_vector())))
            .collect();
        let lhs = object_wrench(&map, &combined).unwrap().to_vector();
        let rhs = object_wrench(&map, &a).unwrap().to_vector() * s + object_wrench(&map, &b).unwrap().to_vector();
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }
}
