use flickerloc::camera::project;
use flickerloc::frames::camera_from_body;
use flickerloc::sim::{camera_pose, simulate, NoiseSpec, ScenarioConfig};
use nalgebra::Vector3;

fn short_square() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::square();
    cfg.duration_s = 3.0;
    cfg
}

#[test]
fn reruns_are_identical() {
    let cfg = short_square();
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    a.write(&dir.path().join("a"), false).unwrap();
    b.write(&dir.path().join("b"), false).unwrap();
    for f in ["events.csv", "imu.csv", "groundtruth.csv", "landmarks_truth.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(x == y, "{f} differs between reruns");
    }
}

#[test]
fn logged_pixels_match_projection_of_logged_pose() {
    let cfg = short_square();
    let cam = cfg.camera.model().unwrap();
    let sim = simulate(&cfg).unwrap();
    let registry = cfg.registry();
    let mut checked = 0;
    for s in sim.truth.samples.iter().step_by(37) {
        let pose = camera_pose(&cfg, s.t as f64 / 1e6);
        assert!((pose.translation - s.position).norm() < 1e-12);
        assert!(pose.rotation.angle_to(&s.camera_attitude) < 1e-12);
        for l in &s.landmarks {
            let p = project(&cam, &s.pose(), &registry.get(l.id).unwrap().position).unwrap();
            assert!((p.depth - l.depth).abs() < 1e-9);
            if l.visible {
                assert!((p.pixel - l.pixel).norm() < 1e-9);
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn events_cluster_around_logged_pixels() {
    // Every landmark event lies on its disk: within radius + 1 px of the
    // logged centre of some visible landmark.
    let mut cfg = short_square();
    cfg.noise = NoiseSpec::ideal();
    let sim = simulate(&cfg).unwrap();
    for e in sim.events.iter().step_by(501) {
        let s = sim.truth.nearest(e.t).unwrap();
        let near = s.landmarks.iter().filter(|l| l.visible).any(|l| {
            let r = cfg.landmarks[l.id as usize].radius_px_at_1m / l.depth;
            (l.pixel - nalgebra::Vector2::new(f64::from(e.x), f64::from(e.y))).norm() <= r + 2.0
        });
        assert!(near, "event at ({}, {}) t={} is off every disk", e.x, e.y, e.t);
    }
}

#[test]
fn ideal_imu_matches_trajectory() {
    let mut cfg = short_square();
    cfg.noise = NoiseSpec::ideal();
    let sim = simulate(&cfg).unwrap();
    let g = Vector3::new(0.0, 0.0, -cfg.noise.gravity);
    for s in sim.imu.iter().step_by(7) {
        let st = cfg.trajectory.state(s.t as f64 / 1e6);
        let expected = st.attitude.inverse() * (st.acceleration - g);
        assert!((s.accel - expected).norm() < 1e-9);
        assert!((s.gyro - st.body_rate).norm() < 1e-9);
    }
    // Camera axes follow the fixed body mounting.
    let st = cfg.trajectory.state(1.0);
    let r_lc = camera_pose(&cfg, 1.0).rotation.to_rotation_matrix();
    let expected = st.attitude.to_rotation_matrix() * camera_from_body::<f64>().transpose();
    assert!((r_lc.matrix() - expected.matrix()).amax() < 1e-12);
}
