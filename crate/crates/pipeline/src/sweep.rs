//! Parameter sweeps over simulated scenarios.

use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use flickerloc::error::{write_csv_rows, DataError};
use flickerloc::sim::{simulate, ScenarioConfig, TrajectorySpec};

use crate::config::RunConfig;
use crate::run::{run_pipeline, Dataset, RunLogs};
use crate::{eval_options, evaluate, PipelineError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    /// Hover distance to the landmark plane (m).
    Range,
    /// Multiplier on every event and IMU noise level.
    Noise,
    /// Number of landmarks taken from the scenario's constellation.
    Landmarks,
}

impl FromStr for SweepParam {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "range" => Ok(Self::Range),
            "noise" => Ok(Self::Noise),
            "landmarks" => Ok(Self::Landmarks),
            _ => Err(PipelineError::Config(format!("unknown sweep parameter `{s}`, expected range, noise or landmarks"))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Range => "range",
            Self::Noise => "noise",
            Self::Landmarks => "landmarks",
        }
    }

    /// Applies `value` to a copy of `base`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, PipelineError> {
        let mut s = base.clone();
        match self {
            Self::Range => match &mut s.trajectory {
                TrajectorySpec::Hover(h) => h.position[0] = -value,
                _ => return Err(PipelineError::Config("range sweeps need a hover trajectory".into())),
            },
            Self::Noise => {
                let n = &mut s.noise;
                n.timestamp_jitter_us *= value;
                n.background_rate_hz *= value;
                n.accel_noise_density *= value;
                n.gyro_noise_density *= value;
                n.accel_bias = n.accel_bias.map(|b| b * value);
                n.gyro_bias = n.gyro_bias.map(|b| b * value);
            }
            Self::Landmarks => {
                let k = value.round();
                if !(k >= 1.0 && (k as usize) <= s.landmarks.len()) {
                    return Err(PipelineError::Config(format!(
                        "landmark count {value} outside 1..={}",
                        s.landmarks.len()
                    )));
                }
                s.landmarks.truncate(k as usize);
            }
        }
        s.validate().map_err(PipelineError::Config)?;
        Ok(s)
    }
}

/// Parses `a..b` (inclusive, unit step) or `a..b:step`.
pub fn parse_range(s: &str) -> Result<Vec<f64>, PipelineError> {
    let bad = || PipelineError::Config(format!("invalid range `{s}`, expected start..end or start..end:step"));
    let (span, step) = match s.split_once(':') {
        Some((span, step)) => (span, step.trim().parse::<f64>().map_err(|_| bad())?),
        None => (s, 1.0),
    };
    let (a, b) = span.split_once("..").ok_or_else(bad)?;
    let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if !(a.is_finite() && b.is_finite() && step > 0.0 && b >= a) {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| a + k as f64 * step).collect())
}

/// One sweep point. Metrics are NaN when the run produced no estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub param: &'static str,
    pub value: f64,
    pub seed: u64,
    pub duration_s: f64,
    pub landmarks: usize,
    pub pose_samples: usize,
    pub pnp_fixes: usize,
    pub pos_mean_m: f64,
    pub pos_max_m: f64,
    pub orient_mean_deg: f64,
    pub orient_max_deg: f64,
    pub pixel_rms_px: f64,
    pub freq_within_rate: f64,
    pub j_opt_rate: f64,
    pub dead_reckoning: u8,
}

/// Simulates, runs and evaluates the base scenario at every value.
pub fn sweep(param: SweepParam, values: &[f64], base: &ScenarioConfig, cfg: &RunConfig) -> Result<Vec<SweepRow>, PipelineError> {
    let mut rows = Vec::with_capacity(values.len());
    for (index, &value) in values.iter().enumerate() {
        let scenario = param.apply(base, value)?;
        let sim = simulate(&scenario).map_err(|e| PipelineError::Config(e.to_string()))?;
        let data = Dataset::from_simulation(scenario.clone(), sim);
        let out = run_pipeline(cfg, &data)?;
        let truth = data.truth.as_ref().expect("simulated datasets carry truth");
        let report = evaluate(&RunLogs::from(&out), truth, eval_options(cfg)).ok();
        let nan = f64::NAN;
        let r = report.as_ref();
        rows.push(SweepRow {
            index,
            param: param.name(),
            value,
            seed: scenario.seed,
            duration_s: scenario.duration_s,
            landmarks: scenario.landmarks.len(),
            pose_samples: r.map_or(0, |r| r.pose_samples),
            pnp_fixes: r.map_or(0, |r| r.pnp_fixes),
            pos_mean_m: r.map_or(nan, |r| r.position.mean_m.norm),
            pos_max_m: r.map_or(nan, |r| r.position.max_m.norm),
            orient_mean_deg: r.map_or(nan, |r| r.orientation.geodesic.mean_deg),
            orient_max_deg: r.map_or(nan, |r| r.orientation.geodesic.max_deg),
            pixel_rms_px: r.and_then(|r| r.tracking).map_or(nan, |t| t.pixel_rms_px),
            freq_within_rate: r.and_then(|r| r.frequency).map_or(nan, |f| f.within_tolerance_rate),
            j_opt_rate: r.and_then(|r| r.model_order).map_or(nan, |m| m.rate),
            dead_reckoning: r.map_or(1, |r| u8::from(r.dead_reckoning.flagged)),
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), DataError> {
    write_csv_rows(path, rows)
}
