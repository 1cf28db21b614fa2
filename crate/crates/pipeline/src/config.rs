//! Run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flickerloc::error::DataError;
use flickerloc::gmm::{BicMode, IdentConfig};
use flickerloc::ltkf::LtkfConfig;
use flickerloc::relloc::{MadgwickConfig, PnpConfig, PositionKinematics, TdkfConfig};

/// Dataset locations. Relative paths resolve against the directory of the
/// configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    /// Directory written by `simulate`; supplies every file not given below.
    pub dir: Option<PathBuf>,
    /// Scenario file with the camera and landmark registry.
    pub scenario: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub imu: Option<PathBuf>,
    pub groundtruth: Option<PathBuf>,
    pub landmarks_truth: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    /// Window and correction rate (Hz).
    pub correction_hz: f64,
    /// IMU prediction rate (Hz); an integer multiple of `correction_hz`.
    pub prediction_hz: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self { correction_hz: 100.0, prediction_hz: 200.0 }
    }
}

impl RateConfig {
    /// Prediction steps per correction window.
    pub fn ratio(&self) -> Result<u64, String> {
        let r = self.prediction_hz / self.correction_hz;
        if !(self.correction_hz > 0.0 && r >= 1.0 && (r - r.round()).abs() < 1e-9) {
            return Err(format!(
                "prediction_hz ({}) must be a positive integer multiple of correction_hz ({})",
                self.prediction_hz, self.correction_hz
            ));
        }
        let step = 1e6 / self.prediction_hz;
        if (step - step.round()).abs() > 1e-9 {
            return Err("prediction period must be a whole number of microseconds".into());
        }
        Ok(r.round() as u64)
    }

    pub fn step_us(&self) -> u64 {
        (1e6 / self.prediction_hz).round() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed, recorded in the report. Seeds the mixture restarts.
    pub seed: u64,
    pub inputs: InputPaths,
    /// IMU clock lead over the camera clock (ms).
    pub clock_offset_ms: f64,
    pub gravity: f64,
    /// No valid pose for longer than this flags the run as dead reckoning (s).
    pub lost_timeout_s: f64,
    /// Literal mixture score and reduced translation kinematics.
    pub paper_literal: bool,
    pub rates: RateConfig,
    pub ident: IdentConfig,
    pub ltkf: LtkfConfig,
    pub pnp: PnpConfig,
    pub madgwick: MadgwickConfig,
    pub tdkf: TdkfConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            inputs: InputPaths::default(),
            clock_offset_ms: 3.2,
            gravity: 9.81,
            lost_timeout_s: 0.5,
            paper_literal: false,
            rates: RateConfig::default(),
            ident: IdentConfig::default(),
            ltkf: LtkfConfig::default(),
            pnp: PnpConfig::default(),
            madgwick: MadgwickConfig::default(),
            tdkf: TdkfConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`. Unknown keys are errors.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let mut cfg: Self = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text).map_err(|e| DataError::config(path, e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| DataError::config(path, e.to_string()))?
        };
        let base = std::path::absolute(path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))).map_err(|e| DataError::io(path, e))?;
        cfg.inputs.resolve(&base);
        cfg.validate().map_err(|m| DataError::config(path, m))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.rates.ratio()?;
        if !(self.clock_offset_ms.is_finite() && self.gravity > 0.0 && self.lost_timeout_s > 0.0) {
            return Err("clock_offset_ms must be finite, gravity and lost_timeout_s positive".into());
        }
        if self.ident.j_max == 0 {
            return Err("ident.j_max must be at least 1".into());
        }
        self.ltkf.validate().map_err(|e| e.to_string())?;
        if !(self.tdkf.meas_var_m2 > 0.0 && self.tdkf.accel_noise >= 0.0 && self.tdkf.bias_walk >= 0.0) {
            return Err("tdkf noise parameters must be non-negative with positive meas_var_m2".into());
        }
        Ok(())
    }

    /// Identification settings with the literal mixture score when requested.
    pub fn ident_effective(&self) -> IdentConfig {
        let mut c = self.ident;
        if self.paper_literal {
            c.bic_mode = BicMode::Literal;
        }
        c
    }

    /// Translation filter settings with `Δt²` kinematics when requested.
    pub fn tdkf_effective(&self) -> TdkfConfig {
        let mut c = self.tdkf;
        if self.paper_literal {
            c.kinematics = PositionKinematics::Full;
        }
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serialises")
    }
}

impl InputPaths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.dir,
            &mut self.scenario,
            &mut self.events,
            &mut self.imu,
            &mut self.groundtruth,
            &mut self.landmarks_truth,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            // Drop `.` components so the written configuration stays tidy.
            *p = p.components().filter(|c| *c != std::path::Component::CurDir).collect();
        }
    }

    fn from_dir(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    pub fn scenario_path(&self) -> Option<PathBuf> {
        self.scenario.clone().or_else(|| self.from_dir("scenario.toml"))
    }

    /// Explicit event file, else `events.bin` or `events.csv` in the directory.
    pub fn events_path(&self) -> Option<PathBuf> {
        self.events.clone().or_else(|| {
            let bin = self.from_dir("events.bin")?;
            if bin.exists() {
                Some(bin)
            } else {
                self.from_dir("events.csv")
            }
        })
    }

    pub fn imu_path(&self) -> Option<PathBuf> {
        self.imu.clone().or_else(|| self.from_dir("imu.csv"))
    }

    pub fn groundtruth_path(&self) -> Option<PathBuf> {
        self.groundtruth.clone().or_else(|| self.from_dir("groundtruth.csv"))
    }

    pub fn landmarks_truth_path(&self) -> Option<PathBuf> {
        self.landmarks_truth.clone().or_else(|| self.from_dir("landmarks_truth.csv"))
    }
}
