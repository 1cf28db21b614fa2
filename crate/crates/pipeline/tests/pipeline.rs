use std::path::Path;

use flickerloc::sim::{simulate, HoverSpec, NoiseSpec, ScenarioConfig, TrajectorySpec};
use flickerloc_pipeline::run::{NVBM_LOG, POSE_LOG, TRACK_LOG, WINDOW_LOG};
use flickerloc_pipeline::sync::synchronize;
use flickerloc_pipeline::{run_pipeline, run_to_dir, Dataset, RunConfig, REPORT_JSON, REPORT_TEXT};

fn static_hover(duration_s: f64, noise: NoiseSpec) -> ScenarioConfig {
    let mut s = ScenarioConfig::hover();
    s.duration_s = duration_s;
    s.noise = noise;
    s.trajectory = TrajectorySpec::Hover(HoverSpec { climb_m: 0.0, ..HoverSpec::default() });
    s
}

fn dataset(s: ScenarioConfig) -> Dataset {
    let sim = simulate(&s).unwrap();
    Dataset::from_simulation(s, sim)
}

fn config_for(s: &ScenarioConfig) -> RunConfig {
    RunConfig { clock_offset_ms: s.noise.clock_offset_ms, gravity: s.noise.gravity, ..RunConfig::default() }
}

#[test]
fn noiseless_hover_is_millimetre_accurate() {
    let mut s = ScenarioConfig::hover();
    s.noise = NoiseSpec::ideal();
    let cfg = config_for(&s);
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = run_to_dir(&cfg, &dataset(s), dir.path()).unwrap();
    let r = report.unwrap();
    assert!(r.position.mean_m.norm < 1e-3, "mean position error {} m", r.position.mean_m.norm);
    assert!(!r.dead_reckoning.flagged);
    assert!(r.is_finite());
}

#[test]
fn static_hover_estimate_holds_still() {
    let s = static_hover(10.0, NoiseSpec::ideal());
    let out = run_pipeline(&config_for(&s), &dataset(s)).unwrap();
    let settled: Vec<_> = out.poses.iter().filter(|r| r.t_us >= 1_000_000).collect();
    assert!(settled.len() > 1000);
    let spread = |f: fn(&&flickerloc::relloc::PoseLogRow) -> f64| {
        let v: Vec<f64> = settled.iter().map(f).collect();
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    };
    let (sx, sy, sz) = (spread(|r| r.tx), spread(|r| r.ty), spread(|r| r.tz));
    assert!(sx.max(sy).max(sz) < 1e-4, "translation wanders by ({sx}, {sy}, {sz}) m");
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn reruns_are_byte_identical() {
    let mut s = ScenarioConfig::square();
    s.duration_s = 4.0;
    let cfg = config_for(&s);
    let data = dataset(s);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_to_dir(&cfg, &data, a.path()).unwrap();
    run_to_dir(&cfg, &data, b.path()).unwrap();
    for f in [POSE_LOG, TRACK_LOG, NVBM_LOG, WINDOW_LOG, REPORT_JSON, REPORT_TEXT] {
        assert!(read(a.path(), f) == read(b.path(), f), "{f} differs between reruns");
    }
}

#[test]
fn two_predictions_per_correction() {
    let s = static_hover(2.0, NoiseSpec::default());
    let out = run_pipeline(&config_for(&s), &dataset(s)).unwrap();
    let steady = &out.predictions_per_window[1..];
    assert!(steady.len() >= 150);
    assert!(steady.iter().all(|&n| n == 2), "{steady:?}");
    let cfg = RunConfig { rates: flickerloc_pipeline::config::RateConfig { correction_hz: 100.0, prediction_hz: 400.0 }, ..RunConfig::default() };
    let s = static_hover(1.0, NoiseSpec::default());
    let out = run_pipeline(&cfg, &dataset(s)).unwrap();
    assert!(out.predictions_per_window[1..].iter().all(|&n| n == 4));
}

#[test]
fn skewed_imu_aligns_after_offset() {
    // The simulator stamps the IMU 3.2 ms late on a smoothly accelerating
    // trajectory.
    let mut s = ScenarioConfig::square();
    s.duration_s = 6.0;
    s.noise = NoiseSpec { clock_offset_ms: 3.2, ..NoiseSpec::ideal() };
    let sim = simulate(&s).unwrap();
    let times: Vec<u64> = sim.events.iter().map(|e| e.t).collect();
    let synced = synchronize(&times, &sim.imu, 3.2).unwrap();
    let g = nalgebra::Vector3::new(0.0, 0.0, -s.noise.gravity);
    // Residual lag: the shift of the synchronized stream that best fits the
    // true motion, searched at 0.1 ms resolution.
    let cost = |lag_us: i64| -> f64 {
        synced
            .imu
            .iter()
            .filter(|x| x.t > 100_000 && x.t < 5_900_000)
            .map(|x| {
                let st = s.trajectory.state((x.t as i64 + lag_us) as f64 / 1e6);
                let f = st.attitude.inverse_transform_vector(&(st.acceleration - g));
                (x.accel - f).norm_squared() + (x.gyro - st.body_rate).norm_squared()
            })
            .sum()
    };
    let lags: Vec<i64> = (-50..=50).map(|k| k * 100).collect();
    let best = *lags.iter().min_by(|a, b| cost(**a).total_cmp(&cost(**b))).unwrap();
    assert!(best.abs() < 500, "residual lag {best} us");
    let raw = synchronize(&times, &sim.imu, 0.0).unwrap();
    let raw_cost = |lag: i64| -> f64 {
        raw.imu
            .iter()
            .filter(|x| x.t > 100_000 && x.t < 5_900_000)
            .map(|x| {
                let st = s.trajectory.state((x.t as i64 + lag) as f64 / 1e6);
                (x.accel - st.attitude.inverse_transform_vector(&(st.acceleration - g))).norm_squared()
            })
            .sum()
    };
    let raw_best = *lags.iter().min_by(|a, b| raw_cost(**a).total_cmp(&raw_cost(**b))).unwrap();
    assert!((raw_best + 3200).abs() < 500, "unsynchronised lag {raw_best} us");
}

#[test]
fn losing_the_landmarks_falls_back_to_dead_reckoning() {
    let s = static_hover(3.0, NoiseSpec::default());
    let mut data = dataset(s.clone());
    data.events.retain(|e| !(1_000_000..2_000_000).contains(&e.t));
    let cfg = config_for(&s);
    let dir = tempfile::tempdir().unwrap();
    let (out, report) = run_to_dir(&cfg, &data, dir.path()).unwrap();
    assert!(out.poses.last().unwrap().t_us > 2_900_000, "run stopped at the blackout");
    let r = report.unwrap();
    assert!(r.dead_reckoning.flagged);
    assert!(r.dead_reckoning.longest_gap_s > 1.0);
    assert!(String::from_utf8(read(dir.path(), REPORT_TEXT)).unwrap().contains("dead"));
}

#[test]
fn literal_mode_runs_end_to_end() {
    let mut s = ScenarioConfig::square();
    s.duration_s = 3.0;
    let cfg = RunConfig { paper_literal: true, ..config_for(&s) };
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = run_to_dir(&cfg, &dataset(s), dir.path()).unwrap();
    let r = report.unwrap();
    assert!(r.paper_literal);
    assert!(r.pnp_fixes > 0);
    assert!(r.is_finite());
}

#[test]
fn loads_a_written_simulation() {
    let mut s = ScenarioConfig::square();
    s.duration_s = 2.0;
    let dir = tempfile::tempdir().unwrap();
    simulate(&s).unwrap().write(dir.path(), true).unwrap();
    std::fs::write(dir.path().join("scenario.toml"), toml::to_string(&s).unwrap()).unwrap();
    std::fs::write(dir.path().join("run.toml"), "[inputs]\ndir = \".\"\n").unwrap();
    let cfg = RunConfig::load(&dir.path().join("run.toml")).unwrap();
    let loaded = Dataset::load(&cfg).unwrap();
    let direct = dataset(s);
    assert_eq!(loaded.events, direct.events);
    assert_eq!(loaded.imu.len(), direct.imu.len());
    assert!(loaded.truth.is_some());
    let out = run_to_dir(&cfg, &loaded, &dir.path().join("out")).unwrap();
    assert!(out.1.unwrap().pnp_fixes > 0);
}

#[test]
fn bundled_scenarios_match_the_presets() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios");
    assert_eq!(ScenarioConfig::load(&root.join("square.toml")).unwrap(), ScenarioConfig::square());
    assert_eq!(ScenarioConfig::load(&root.join("hover.toml")).unwrap(), ScenarioConfig::hover());
}
