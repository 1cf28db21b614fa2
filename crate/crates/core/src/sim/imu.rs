//! Accelerometer and gyroscope synthesis.

use std::path::Path;

use nalgebra::Vector3;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::render::{rng_for, STREAM_IMU};
use super::scenario::ScenarioConfig;
use crate::error::{read_csv_rows, write_csv_rows, DataError};
use crate::events::{Micros, MICROS_PER_SEC};

/// One IMU reading stamped on the IMU clock.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub t: Micros,
    /// Specific force in the body frame (m/s²).
    pub accel: Vector3<f64>,
    /// Angular velocity in the body frame (rad/s).
    pub gyro: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct ImuRow {
    t_us: u64,
    ax: f64,
    ay: f64,
    az: f64,
    gx: f64,
    gy: f64,
    gz: f64,
}

/// Samples the IMU at `cfg.rates.imu_hz` over the scenario duration.
///
/// Stamps are taken on the IMU clock, which runs `clock_offset_ms` ahead of
/// the camera clock, so the sample stamped `s` measures the motion at camera
/// time `s - offset`. The specific force is `R_BL (a - g)` with
/// `g = (0, 0, -gravity)`, plus bias and white noise.
pub fn synthesize_imu(cfg: &ScenarioConfig) -> Vec<ImuSample> {
    let n = &cfg.noise;
    let rate = cfg.rates.imu_hz;
    let dt_us = (MICROS_PER_SEC / rate).round() as Micros;
    let end_us = (cfg.duration_s * MICROS_PER_SEC).round() as Micros;
    let offset_s = n.clock_offset_ms / 1e3;
    let mut rng = rng_for(cfg.seed, STREAM_IMU);
    let sd_a = n.accel_noise_density * rate.sqrt();
    let sd_g = n.gyro_noise_density * rate.sqrt();
    let na = (sd_a > 0.0).then(|| Normal::new(0.0, sd_a).unwrap());
    let ng = (sd_g > 0.0).then(|| Normal::new(0.0, sd_g).unwrap());
    let g = Vector3::new(0.0, 0.0, -n.gravity);
    let mut out = Vec::new();
    let mut t = 0;
    while t <= end_us {
        let s = cfg.trajectory.state(t as f64 / MICROS_PER_SEC - offset_s);
        let mut accel = s.attitude.inverse_transform_vector(&(s.acceleration - g)) + Vector3::from(n.accel_bias);
        let mut gyro = s.body_rate + Vector3::from(n.gyro_bias);
        if let Some(d) = &na {
            accel += Vector3::from_fn(|_, _| d.sample(&mut rng));
        }
        if let Some(d) = &ng {
            gyro += Vector3::from_fn(|_, _| d.sample(&mut rng));
        }
        out.push(ImuSample { t, accel, gyro });
        t += dt_us;
    }
    out
}

/// Writes `t_us,ax,ay,az,gx,gy,gz`.
pub fn write_imu_csv(path: &Path, samples: &[ImuSample]) -> Result<(), DataError> {
    let rows: Vec<ImuRow> = samples
        .iter()
        .map(|s| ImuRow {
            t_us: s.t,
            ax: s.accel.x,
            ay: s.accel.y,
            az: s.accel.z,
            gx: s.gyro.x,
            gy: s.gyro.y,
            gz: s.gyro.z,
        })
        .collect();
    write_csv_rows(path, &rows)
}

pub fn read_imu_csv(path: &Path) -> Result<Vec<ImuSample>, DataError> {
    let rows: Vec<ImuRow> = read_csv_rows(path)?;
    Ok(rows
        .into_iter()
        .map(|r| ImuSample {
            t: r.t_us,
            accel: Vector3::new(r.ax, r.ay, r.az),
            gyro: Vector3::new(r.gx, r.gy, r.gz),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::NoiseSpec;
    use crate::sim::trajectory::{HoverSpec, TrajectorySpec, Waypoint, WaypointSpec};
    use approx::assert_relative_eq;

    fn ideal(trajectory: TrajectorySpec) -> ScenarioConfig {
        ScenarioConfig {
            duration_s: 1.0,
            trajectory,
            noise: NoiseSpec::ideal(),
            ..ScenarioConfig::hover()
        }
    }

    #[test]
    fn static_level_reads_gravity() {
        let cfg = ideal(TrajectorySpec::Hover(HoverSpec { climb_m: 0.0, ..HoverSpec::default() }));
        let s = synthesize_imu(&cfg);
        assert_eq!(s.len(), 201);
        for x in &s {
            assert_relative_eq!(x.accel, Vector3::new(0.0, 0.0, 9.81), epsilon = 1e-12);
            assert_relative_eq!(x.gyro, Vector3::zeros());
        }
    }

    #[test]
    fn hover_yaw_rate() {
        let cfg = ideal(TrajectorySpec::Hover(HoverSpec {
            climb_m: 0.0,
            yaw_rate_deg_s: 0.5f64.to_degrees(),
            ..HoverSpec::default()
        }));
        for x in synthesize_imu(&cfg).iter().skip(1) {
            assert_relative_eq!(x.gyro.z, 0.5, epsilon = 1e-12);
            assert_relative_eq!(x.accel, Vector3::new(0.0, 0.0, 9.81), epsilon = 1e-9);
        }
    }

    #[test]
    fn forward_acceleration_appears_on_x() {
        // Quintic segment: a(t) = 60 u (1 - 3u + 2u²) d / T² at u = t / T.
        let cfg = ideal(TrajectorySpec::Waypoints(WaypointSpec {
            points: vec![
                Waypoint { t_s: 0.0, position: [0.0; 3], rpy_deg: [0.0; 3] },
                Waypoint { t_s: 1.0, position: [1.0, 0.0, 0.0], rpy_deg: [0.0; 3] },
            ],
        }));
        let s = synthesize_imu(&cfg);
        let u: f64 = 0.2;
        let expected = 60.0 * u * (1.0 - 3.0 * u + 2.0 * u * u);
        assert_relative_eq!(s[40].accel.x, expected, epsilon = 1e-9);
        assert_relative_eq!(s[40].accel.z, 9.81, epsilon = 1e-12);
    }

    #[test]
    fn clock_offset_delays_motion() {
        let mut cfg = ideal(TrajectorySpec::Hover(HoverSpec {
            climb_m: 0.0,
            yaw_rate_deg_s: 10.0,
            yaw_rate_start_s: 0.5,
            ..HoverSpec::default()
        }));
        cfg.noise.clock_offset_ms = 10.0;
        let s = synthesize_imu(&cfg);
        let onset = s.iter().find(|x| x.gyro.z > 0.0).unwrap().t;
        assert_eq!(onset, 510_000);
    }

    #[test]
    fn csv_round_trip() {
        let mut cfg = ScenarioConfig::hover();
        cfg.duration_s = 0.1;
        let s = synthesize_imu(&cfg);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("imu.csv");
        write_imu_csv(&p, &s).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("t_us,ax,ay,az,gx,gy,gz\n"));
        assert_eq!(read_imu_csv(&p).unwrap(), s);
    }
}
