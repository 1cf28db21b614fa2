//! Scenario description: camera, landmarks, trajectory and sensor noise.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::trajectory::{HoverSpec, SquareSpec, TrajectorySpec};
use crate::camera::CameraModel;
use crate::error::DataError;
use crate::events::SensorSize;
use crate::gmm::{LandmarkRegistry, RegisteredLandmark};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub width: u16,
    pub height: u16,
    /// Horizontal field of view used when explicit intrinsics are absent.
    pub fov_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            fov_deg: 45.0,
            fu: None,
            fv: None,
            u0: None,
            v0: None,
        }
    }
}

impl CameraConfig {
    pub fn model(&self) -> Result<CameraModel<f64>, String> {
        let size = SensorSize::new(self.width, self.height);
        let base = CameraModel::from_fov(size, self.fov_deg).map_err(|e| e.to_string())?;
        CameraModel::new(
            self.fu.unwrap_or(base.fu),
            self.fv.or(self.fu).unwrap_or(base.fv),
            self.u0.unwrap_or(base.u0),
            self.v0.unwrap_or(base.v0),
            size,
        )
        .map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkSpec {
    /// Position in the landmark frame at `t = 0` (m).
    pub position: [f64; 3],
    pub frequency_hz: f64,
    /// Disk radius in pixels when seen from 1 m.
    #[serde(default = "default_radius")]
    pub radius_px_at_1m: f64,
    #[serde(default = "default_duty")]
    pub duty: f64,
    /// Flicker phase as a fraction of the period.
    #[serde(default)]
    pub phase: f64,
    /// Constant drift velocity in the landmark frame (m/s).
    #[serde(default)]
    pub drift_velocity: [f64; 3],
}

fn default_radius() -> f64 {
    12.0
}

fn default_duty() -> f64 {
    0.5
}

impl LandmarkSpec {
    pub fn position_at(&self, t: f64) -> Point3<f64> {
        Point3::from(Vector3::from(self.position) + Vector3::from(self.drift_velocity) * t)
    }
}

/// Seven landmarks one metre apart, flickering at 200 to 600 Hz, spread
/// 1.5 m along the landmark-frame `x` axis.
pub fn default_constellation() -> Vec<LandmarkSpec> {
    let pts: [([f64; 3], f64); 7] = [
        ([0.0, -0.75, 0.3], 200.0),
        ([0.0, 0.75, 0.3], 250.0),
        ([0.0, 0.0, 1.2], 300.0),
        ([1.0, -0.6, 0.9], 350.0),
        ([1.0, 0.6, 0.9], 400.0),
        ([0.5, 0.0, 0.0], 500.0),
        ([-0.5, 0.0, 0.6], 600.0),
    ];
    pts.iter()
        .enumerate()
        .map(|(i, &(position, frequency_hz))| LandmarkSpec {
            position,
            frequency_hz,
            radius_px_at_1m: default_radius(),
            duty: default_duty(),
            phase: 0.13 * i as f64,
            drift_velocity: [0.0; 3],
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Log-intensity contrast threshold.
    pub contrast_threshold: f64,
    /// Log-intensity step of a flicker edge.
    pub flicker_amplitude: f64,
    /// Standard deviation of event timestamp jitter (µs).
    pub timestamp_jitter_us: f64,
    /// Background noise events per pixel per second.
    pub background_rate_hz: f64,
    pub refractory_us: f64,
    /// Accelerometer white noise density (m/s²/√Hz).
    pub accel_noise_density: f64,
    pub accel_bias: [f64; 3],
    /// Gyroscope white noise density (rad/s/√Hz).
    pub gyro_noise_density: f64,
    pub gyro_bias: [f64; 3],
    pub gravity: f64,
    /// IMU clock minus camera clock (ms).
    pub clock_offset_ms: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            contrast_threshold: 0.2,
            flicker_amplitude: 0.4,
            timestamp_jitter_us: 5.0,
            background_rate_hz: 0.02,
            refractory_us: 100.0,
            accel_noise_density: 6e-4,
            accel_bias: [0.02, -0.01, 0.015],
            gyro_noise_density: 1.2e-4,
            gyro_bias: [0.0; 3],
            gravity: 9.81,
            clock_offset_ms: 3.2,
        }
    }
}

impl NoiseSpec {
    /// Noise-free sensors with no clock offset.
    pub fn ideal() -> Self {
        Self {
            timestamp_jitter_us: 0.0,
            background_rate_hz: 0.0,
            refractory_us: 0.0,
            accel_noise_density: 0.0,
            accel_bias: [0.0; 3],
            gyro_noise_density: 0.0,
            gyro_bias: [0.0; 3],
            clock_offset_ms: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let scalars = [
            self.contrast_threshold,
            self.flicker_amplitude,
            self.timestamp_jitter_us,
            self.background_rate_hz,
            self.refractory_us,
            self.accel_noise_density,
            self.gyro_noise_density,
            self.gravity,
            self.clock_offset_ms,
        ];
        if scalars.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err("noise parameters must be finite and non-negative".into());
        }
        if self.contrast_threshold == 0.0 {
            return Err("contrast threshold must be positive".into());
        }
        Ok(())
    }
}

/// Internal sampling rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSpec {
    /// Grid on which disk motion is linearly interpolated (Hz).
    pub render_hz: f64,
    pub imu_hz: f64,
    /// Ground-truth log rate (Hz).
    pub truth_hz: f64,
}

impl Default for RateSpec {
    fn default() -> Self {
        Self {
            render_hz: 1000.0,
            imu_hz: 200.0,
            truth_hz: 1000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default = "default_constellation")]
    pub landmarks: Vec<LandmarkSpec>,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub rates: RateSpec,
}

impl ScenarioConfig {
    /// Square trajectory around the default constellation.
    pub fn square() -> Self {
        let trajectory = TrajectorySpec::Square(SquareSpec::default());
        Self {
            seed: 1,
            duration_s: trajectory.natural_duration().unwrap(),
            camera: CameraConfig::default(),
            landmarks: default_constellation(),
            trajectory,
            noise: NoiseSpec::default(),
            rates: RateSpec::default(),
        }
    }

    /// Take-off and hover in front of the default constellation.
    pub fn hover() -> Self {
        Self {
            seed: 1,
            duration_s: 10.0,
            camera: CameraConfig::default(),
            landmarks: default_constellation(),
            trajectory: TrajectorySpec::Hover(HoverSpec::default()),
            noise: NoiseSpec::default(),
            rates: RateSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err("duration_s must be positive".into());
        }
        self.camera.model()?;
        self.noise.validate()?;
        self.trajectory.validate()?;
        if self.landmarks.len() > 64 {
            return Err("at most 64 landmarks are supported".into());
        }
        for l in &self.landmarks {
            if !(l.frequency_hz > 0.0 && l.radius_px_at_1m > 0.0 && l.duty > 0.0 && l.duty < 1.0) {
                return Err(format!("landmark at {:?} has invalid flicker or size", l.position));
            }
        }
        let mut f: Vec<f64> = self.landmarks.iter().map(|l| l.frequency_hz).collect();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if f.windows(2).any(|w| w[0] == w[1]) {
            return Err("landmark frequencies must be distinct".into());
        }
        let r = self.rates;
        if !(r.render_hz > 0.0 && r.imu_hz > 0.0 && r.truth_hz > 0.0) {
            return Err("rates must be positive".into());
        }
        Ok(())
    }

    /// Registry of landmark ids (in declaration order), frequencies and
    /// initial positions.
    pub fn registry(&self) -> LandmarkRegistry {
        LandmarkRegistry::new(
            self.landmarks
                .iter()
                .enumerate()
                .map(|(i, l)| RegisteredLandmark {
                    id: i as u32,
                    frequency_hz: l.frequency_hz,
                    position: Point3::from(l.position),
                })
                .collect(),
        )
    }

    /// Loads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let cfg: Self = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text).map_err(|e| DataError::config(path, e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| DataError::config(path, e.to_string()))?
        };
        cfg.validate().map_err(|m| DataError::config(path, m))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios_validate() {
        ScenarioConfig::square().validate().unwrap();
        ScenarioConfig::hover().validate().unwrap();
    }

    #[test]
    fn default_constellation_rules() {
        let c = default_constellation();
        assert_eq!(c.len(), 7);
        assert!(c.iter().all(|l| l.frequency_hz >= 200.0));
    }

    #[test]
    fn toml_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig::square();
        let t = dir.path().join("s.toml");
        std::fs::write(&t, toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(ScenarioConfig::load(&t).unwrap(), cfg);
        let j = dir.path().join("s.json");
        std::fs::write(&j, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(ScenarioConfig::load(&j).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("s.toml");
        std::fs::write(&t, "duration_s = 1.0\n[noise]\njitter = 3.0\n").unwrap();
        assert!(matches!(ScenarioConfig::load(&t), Err(DataError::Config { .. })));
    }

    #[test]
    fn duplicate_frequencies_are_rejected() {
        let mut cfg = ScenarioConfig::hover();
        cfg.landmarks[1].frequency_hz = cfg.landmarks[0].frequency_hz;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn explicit_intrinsics_override_fov() {
        let c = CameraConfig { fu: Some(600.0), u0: Some(300.0), ..CameraConfig::default() };
        let m = c.model().unwrap();
        assert_eq!((m.fu, m.fv, m.u0, m.v0), (600.0, 600.0, 300.0, 240.0));
    }
}
