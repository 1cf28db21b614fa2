use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector2, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use flickerloc::camera::{project, CameraModel, RelativePose};
use flickerloc::events::SensorSize;
use flickerloc::gmm::{assign_clusters, em_fit, EmConfig, LandmarkMeasurement, NvbmFrame};
use flickerloc::kalman::is_spd;
use flickerloc::ltkf::{interaction_matrix, CameraTwist, LtkfConfig, Tracker};
use flickerloc::relloc::{pnp_solve, Correspondence, Madgwick, MadgwickConfig, PnpConfig, Tdkf, TdkfConfig};

fn mixture_sample(seed: u64, means: &[f64], n_each: usize, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    means
        .iter()
        .flat_map(|&m| (0..n_each).map(|_| m + noise.sample(&mut rng)).collect::<Vec<_>>())
        .collect()
}

fn camera(fu: f64, fv: f64) -> CameraModel<f64> {
    CameraModel::new(fu, fv, 320.0, 240.0, SensorSize::new(640, 480)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn em_log_likelihood_never_decreases(
        seed in any::<u64>(),
        means in proptest::collection::vec(150.0..700.0f64, 1..6),
        j in 1usize..7,
        sd in 0.5..20.0f64,
    ) {
        let f = mixture_sample(seed, &means, 20, sd);
        let cfg = EmConfig { restart_on_degenerate: false, ..EmConfig::default() };
        let m = em_fit(&f, j.min(f.len()), &cfg, seed).unwrap();
        for w in m.ll_history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-7 * w[0].abs().max(1.0), "{:?}", m.ll_history);
        }
        for n in 0..m.n_samples() {
            let s: f64 = m.responsibility_row(n).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        let w: f64 = m.components.iter().map(|c| c.weight).sum();
        prop_assert!((w - 1.0).abs() < 1e-9);
        prop_assert!(m.components.iter().all(|c| c.var >= cfg.var_floor));
    }

    #[test]
    fn clusters_partition_the_window(
        seed in any::<u64>(),
        means in proptest::collection::vec(150.0..700.0f64, 1..8),
        j in 1usize..9,
        gap in 0.0..40.0f64,
    ) {
        let f = mixture_sample(seed, &means, 12, 3.0);
        let m = em_fit(&f, j.min(f.len()), &EmConfig::default(), seed).unwrap();
        let raw = assign_clusters(&m);
        let merged = raw.merged(gap);
        for set in [&raw, &merged] {
            let mut seen = vec![0u32; f.len()];
            for c in &set.clusters {
                for &i in &c.members {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&k| k == 1));
        }
        let means: Vec<f64> = merged.clusters.iter().map(|c| c.mean).collect();
        for w in means.windows(2) {
            prop_assert!(w[1] - w[0] >= gap);
        }
    }

    #[test]
    fn tracker_covariances_stay_positive_definite(
        seed in any::<u64>(),
        steps in 1usize..200,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cam = camera(600.0, 610.0);
        let mut tracker = Tracker::<f64>::new(LtkfConfig::default()).unwrap();
        for k in 0..steps {
            let twist = CameraTwist {
                linear: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                angular: Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5)),
            };
            let depth = rng.random_range(0.5..10.0);
            tracker.predict(0.005, &cam, &twist, |_| Some(depth));
            if k % 2 == 1 {
                let mut measurements = Vec::new();
                for id in 0..3u32 {
                    if rng.random_bool(0.8) {
                        measurements.push(LandmarkMeasurement {
                            id,
                            nominal_hz: 200.0 + 100.0 * f64::from(id),
                            mean_hz: 200.0 + 100.0 * f64::from(id),
                            center: Vector2::new(rng.random_range(100.0..540.0), rng.random_range(100.0..380.0)),
                            pixel_count: 10,
                            member_count: 10,
                        });
                    }
                }
                tracker.correct(&NvbmFrame { t: k as u64 * 5_000, measurements, ambiguous: false }).unwrap();
            }
            for tr in tracker.tracks() {
                prop_assert!(is_spd(&tr.cov));
            }
        }
    }

    #[test]
    fn translation_filter_covariance_stays_positive_definite(seed in any::<u64>(), steps in 1usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Tdkf::<f64>::new(TdkfConfig::default(), Vector3::new(-5.0, 0.0, 0.5));
        for k in 0..steps {
            let a = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            f.predict(&a, rng.random_range(0.001..0.02));
            if k % 2 == 1 {
                let z = f.state.translation() + Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
                f.update(&z).unwrap();
            }
            prop_assert!(is_spd(&f.state.p));
        }
    }

    #[test]
    fn attitude_filter_stays_normalised(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q0 = UnitQuaternion::<f64>::from_euler_angles(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0));
        let mut m = Madgwick::new(MadgwickConfig::default(), q0);
        for _ in 0..500 {
            let gyro = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let accel = Vector3::from_fn(|_, _| rng.random_range(-20.0..20.0));
            let yaw = rng.random_bool(0.5).then(|| rng.random_range(-3.1..3.1));
            m.step(&gyro, &accel, yaw, rng.random_range(0.001..0.02));
            let q = m.attitude();
            prop_assert!((q.into_inner().norm() - 1.0).abs() < 1e-12);
            let r = q.to_rotation_matrix().into_inner();
            prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_newton_cost_never_increases(seed in any::<u64>(), noise_px in 0.0..3.0f64, warm in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cam = camera(600.0, 600.0);
        let truth = random_pose(&mut rng);
        let pts = cloud(&mut rng);
        let n = Normal::new(0.0, noise_px.max(1e-12)).unwrap();
        let data: Vec<Correspondence<f64>> = pts
            .iter()
            .map(|p| Correspondence { point: *p, pixel: project(&cam, &truth, p).unwrap().pixel + Vector2::from_fn(|_, _| n.sample(&mut rng)) })
            .collect();
        let init = RelativePose::new(
            UnitQuaternion::from_scaled_axis(Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1))) * truth.rotation,
            truth.translation + Vector3::from_fn(|_, _| rng.random_range(-0.3..0.3)),
        );
        if let Ok(est) = pnp_solve(&data, &cam, warm.then_some(&init), &PnpConfig::default()) {
            for w in est.cost_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-18, "{:?}", est.cost_history);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn interaction_matrix_matches_finite_differences(
        p in (-3.0..3.0f64, -2.0..2.0f64, 0.5..20.0f64),
        v in proptest::array::uniform3(-2.0..2.0f64),
        w in proptest::array::uniform3(-1.5..1.5f64),
        fu in 300.0..900.0f64,
        fv_ratio in 0.8..1.25f64,
    ) {
        let cam = camera(fu, fu * fv_ratio);
        let p = Vector3::new(p.0 * p.2 / 3.0, p.1 * p.2 / 3.0, p.2);
        let (v, w) = (Vector3::from(v), Vector3::from(w));
        // A static point seen from a camera moving with twist (v, w) obeys
        // dP/dt = -v - w x P in the camera frame.
        let at = |h: f64| {
            let q = Rotation3::from_scaled_axis(-w * h) * p - v * h;
            cam.project_camera_point(&q).unwrap().0
        };
        let h = 1e-4;
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let (c, z) = cam.project_camera_point(&p).unwrap();
        let l = interaction_matrix(&c, z, &cam).unwrap();
        let analytic = l * nalgebra::Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z);
        let rel = (analytic - fd).norm() / fd.norm().max(1e-9);
        prop_assert!(rel < 1e-4, "relative error {rel}");
    }
}

fn random_pose(rng: &mut ChaCha8Rng) -> RelativePose<f64> {
    // Camera 3 to 8 m in front of the cloud, looking at it with random roll.
    let dist = rng.random_range(3.0..8.0);
    let dir = Vector3::new(-1.0, rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)).normalize();
    let position = dir * dist + Vector3::new(0.5, 0.0, 0.6);
    let forward = -dir;
    let up = Vector3::z();
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right);
    let r = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[right, down, forward]));
    let roll = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(forward), rng.random_range(-0.5..0.5));
    RelativePose::new(roll * UnitQuaternion::from_rotation_matrix(&r), position)
}

fn cloud(rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    (0..7)
        .map(|_| Point3::new(rng.random_range(-0.5..1.5), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.2)))
        .collect()
}
