//! Accuracy metrics of a run against ground truth.

use std::fmt::Write as _;

use nalgebra::{Quaternion, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use flickerloc::events::Micros;
use flickerloc::frames::wrap_angle;
use flickerloc::ltkf::TrackSource;
use flickerloc::relloc::{ExtrinsicCalib, PoseLogRow};
use flickerloc::sim::{interpolate_pose, PixelTruth};

use crate::run::{RunLogs, TruthData};
use crate::PipelineError;

/// Bound on the clustered frequency error (Hz).
pub const FREQUENCY_TOLERANCE_HZ: f64 = 3.21;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisStats {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionErrors {
    /// Mean absolute error per axis and mean error norm (m).
    pub mean_m: AxisStats,
    /// Maximum absolute error per axis and maximum error norm (m).
    pub max_m: AxisStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleStats {
    pub mean_deg: f64,
    pub max_deg: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationErrors {
    /// Rotation angle between estimated and true camera attitude.
    pub geodesic: AngleStats,
    /// Body roll, pitch and yaw differences.
    pub roll: AngleStats,
    pub pitch: AngleStats,
    pub yaw: AngleStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingErrors {
    /// RMS distance between track states and true landmark pixels.
    pub pixel_rms_px: f64,
    /// Mean distance over prediction-only rows between corrections.
    pub predict_drift_mean_px: f64,
    pub samples: usize,
    pub predict_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyErrors {
    pub windows: usize,
    pub identified_windows: usize,
    /// Mean over identified windows of the largest cluster-mean error (Hz).
    pub cluster_mean_err_hz: f64,
    pub cluster_max_err_hz: f64,
    /// Share of identified windows whose cluster means all lie within tolerance.
    pub within_tolerance_rate: f64,
    pub tolerance_hz: f64,
    /// Largest single-transition error inside identified clusters (Hz).
    pub raw_max_err_hz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOrder {
    pub windows: usize,
    pub correct: usize,
    /// Share of windows whose selected component count equals the number of
    /// landmarks in view.
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeadReckoning {
    /// Set when no valid pose arrived for longer than the timeout.
    pub flagged: bool,
    pub longest_gap_s: f64,
    pub timeout_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub paper_literal: bool,
    pub pose_samples: usize,
    pub evaluated_span_s: f64,
    pub pnp_fixes: usize,
    pub position: PositionErrors,
    pub orientation: OrientationErrors,
    pub tracking: Option<TrackingErrors>,
    pub frequency: Option<FrequencyErrors>,
    pub model_order: Option<ModelOrder>,
    pub dead_reckoning: DeadReckoning,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub seed: u64,
    pub paper_literal: bool,
    pub lost_timeout_s: f64,
}

fn row_attitude(r: &PoseLogRow) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(r.qw, r.qx, r.qy, r.qz))
}

fn angle_stats(v: &[f64]) -> AngleStats {
    let n = v.len().max(1) as f64;
    AngleStats {
        mean_deg: v.iter().sum::<f64>() / n,
        max_deg: v.iter().copied().fold(0.0, f64::max),
    }
}

/// Landmark pixel at `t`, linearly interpolated between the bracketing
/// truth samples; `None` unless the landmark is visible at both.
pub fn interpolate_pixel(pixels: &[(Micros, Vec<PixelTruth>)], id: u32, t: Micros) -> Option<Vector2<f64>> {
    let k = pixels.partition_point(|p| p.0 <= t);
    let a = &pixels[k.checked_sub(1)?];
    let pa = a.1.iter().find(|l| l.id == id).filter(|l| l.visible)?;
    if a.0 == t {
        return Some(pa.pixel);
    }
    let b = pixels.get(k)?;
    let pb = b.1.iter().find(|l| l.id == id).filter(|l| l.visible)?;
    let w = (t - a.0) as f64 / (b.0 - a.0) as f64;
    Some(pa.pixel.lerp(&pb.pixel, w))
}

fn visible_at(pixels: &[(Micros, Vec<PixelTruth>)], t: Micros) -> Option<usize> {
    flickerloc::sim::nearest_by(pixels, t, |p| p.0).map(|p| p.1.iter().filter(|l| l.visible).count())
}

fn dead_reckoning(poses: &[PoseLogRow], timeout_s: f64) -> DeadReckoning {
    let mut longest = 0u64;
    let mut last = poses.first().map(|r| r.t_us);
    for r in poses {
        if let Some(l) = last {
            longest = longest.max(r.t_us - l);
        }
        if r.pnp_valid != 0 {
            last = Some(r.t_us);
        }
    }
    let longest_gap_s = longest as f64 / 1e6;
    DeadReckoning { flagged: longest_gap_s > timeout_s, longest_gap_s, timeout_s }
}

/// Compares the logs with ground truth interpolated linearly (spherically
/// for rotations) at each logged timestamp inside the truth span.
pub fn evaluate(logs: &RunLogs, truth: &TruthData, opts: EvalOptions) -> Result<MetricsReport, PipelineError> {
    let calib = ExtrinsicCalib::<f64>::default();
    let mut pos_err: Vec<Vector3<f64>> = Vec::new();
    let mut geo = Vec::new();
    let (mut roll, mut pitch, mut yaw) = (Vec::new(), Vec::new(), Vec::new());
    let mut span: Option<(Micros, Micros)> = None;
    for r in &logs.poses {
        let Some(gt) = interpolate_pose(&truth.poses, r.t_us) else { continue };
        pos_err.push(Vector3::new(r.tx, r.ty, r.tz) - gt.position);
        let q = row_attitude(r);
        geo.push(q.angle_to(&gt.camera_attitude).to_degrees());
        let (er, ep, ey) = calib.body_attitude(&q).euler_angles();
        let (tr, tp, ty) = calib.body_attitude(&gt.camera_attitude).euler_angles();
        roll.push(wrap_angle(er - tr).abs().to_degrees());
        pitch.push(wrap_angle(ep - tp).abs().to_degrees());
        yaw.push(wrap_angle(ey - ty).abs().to_degrees());
        span = Some(span.map_or((r.t_us, r.t_us), |(a, _)| (a, r.t_us)));
    }
    let Some((t0, t1)) = span else {
        return Err(PipelineError::Eval("pose log and ground truth do not overlap".into()));
    };
    let n = pos_err.len() as f64;
    let mean_abs = |f: &dyn Fn(&Vector3<f64>) -> f64| pos_err.iter().map(f).sum::<f64>() / n;
    let max_abs = |f: &dyn Fn(&Vector3<f64>) -> f64| pos_err.iter().map(f).fold(0.0, f64::max);
    let position = PositionErrors {
        mean_m: AxisStats {
            x: mean_abs(&|e| e.x.abs()),
            y: mean_abs(&|e| e.y.abs()),
            z: mean_abs(&|e| e.z.abs()),
            norm: mean_abs(&|e| e.norm()),
        },
        max_m: AxisStats {
            x: max_abs(&|e| e.x.abs()),
            y: max_abs(&|e| e.y.abs()),
            z: max_abs(&|e| e.z.abs()),
            norm: max_abs(&|e| e.norm()),
        },
    };
    let orientation = OrientationErrors {
        geodesic: angle_stats(&geo),
        roll: angle_stats(&roll),
        pitch: angle_stats(&pitch),
        yaw: angle_stats(&yaw),
    };

    let tracking = (!truth.pixels.is_empty())
        .then(|| {
            let (mut sq, mut count, mut drift, mut drift_n) = (0.0, 0usize, 0.0, 0usize);
            for r in &logs.tracks {
                let Some(p) = interpolate_pixel(&truth.pixels, r.id, r.t_us) else { continue };
                let e = (Vector2::new(r.u, r.v) - p).norm();
                sq += e * e;
                count += 1;
                if r.source == TrackSource::Predict {
                    drift += e;
                    drift_n += 1;
                }
            }
            (count > 0).then(|| TrackingErrors {
                pixel_rms_px: (sq / count as f64).sqrt(),
                predict_drift_mean_px: if drift_n > 0 { drift / drift_n as f64 } else { 0.0 },
                samples: count,
                predict_samples: drift_n,
            })
        })
        .flatten();

    let identified: Vec<_> = logs.windows.iter().filter(|w| w.measurements > 0).collect();
    let frequency = (!identified.is_empty()).then(|| {
        let m = identified.len() as f64;
        FrequencyErrors {
            windows: logs.windows.len(),
            identified_windows: identified.len(),
            cluster_mean_err_hz: identified.iter().map(|w| w.cluster_max_err_hz).sum::<f64>() / m,
            cluster_max_err_hz: identified.iter().map(|w| w.cluster_max_err_hz).fold(0.0, f64::max),
            within_tolerance_rate: identified.iter().filter(|w| w.cluster_max_err_hz <= FREQUENCY_TOLERANCE_HZ).count() as f64 / m,
            tolerance_hz: FREQUENCY_TOLERANCE_HZ,
            raw_max_err_hz: identified.iter().map(|w| w.raw_max_err_hz).filter(|e| e.is_finite()).fold(0.0, f64::max),
        }
    });

    let model_order = (!truth.pixels.is_empty() && !logs.windows.is_empty()).then(|| {
        let mut correct = 0;
        let mut windows = 0;
        for w in &logs.windows {
            if let Some(v) = visible_at(&truth.pixels, w.t_us) {
                windows += 1;
                correct += usize::from(v == w.j_opt);
            }
        }
        ModelOrder { windows, correct, rate: if windows > 0 { correct as f64 / windows as f64 } else { 0.0 } }
    });

    Ok(MetricsReport {
        seed: opts.seed,
        paper_literal: opts.paper_literal,
        pose_samples: pos_err.len(),
        evaluated_span_s: (t1 - t0) as f64 / 1e6,
        pnp_fixes: logs.poses.iter().filter(|r| r.pnp_valid != 0).count(),
        position,
        orientation,
        tracking,
        frequency,
        model_order,
        dead_reckoning: dead_reckoning(&logs.poses, opts.lost_timeout_s),
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let p = &self.position;
        writeln!(o, "seed {}  paper_literal {}", self.seed, self.paper_literal).unwrap();
        writeln!(o, "pose samples {} over {:.3} s, {} PnP fixes", self.pose_samples, self.evaluated_span_s, self.pnp_fixes).unwrap();
        writeln!(o).unwrap();
        writeln!(o, "position error (m)      x          y          z          norm").unwrap();
        writeln!(o, "  mean           {:>10.5} {:>10.5} {:>10.5} {:>10.5}", p.mean_m.x, p.mean_m.y, p.mean_m.z, p.mean_m.norm).unwrap();
        writeln!(o, "  max            {:>10.5} {:>10.5} {:>10.5} {:>10.5}", p.max_m.x, p.max_m.y, p.max_m.z, p.max_m.norm).unwrap();
        writeln!(o).unwrap();
        let r = &self.orientation;
        writeln!(o, "orientation error (deg) geodesic   roll       pitch      yaw").unwrap();
        writeln!(o, "  mean           {:>10.4} {:>10.4} {:>10.4} {:>10.4}", r.geodesic.mean_deg, r.roll.mean_deg, r.pitch.mean_deg, r.yaw.mean_deg).unwrap();
        writeln!(o, "  max            {:>10.4} {:>10.4} {:>10.4} {:>10.4}", r.geodesic.max_deg, r.roll.max_deg, r.pitch.max_deg, r.yaw.max_deg).unwrap();
        writeln!(o).unwrap();
        match &self.tracking {
            Some(t) => writeln!(
                o,
                "tracking: pixel RMS {:.4} px over {} samples, prediction drift {:.4} px over {} samples",
                t.pixel_rms_px, t.samples, t.predict_drift_mean_px, t.predict_samples
            )
            .unwrap(),
            None => writeln!(o, "tracking: no pixel ground truth").unwrap(),
        }
        match &self.frequency {
            Some(f) => writeln!(
                o,
                "frequency: {}/{} windows identified, cluster error mean {:.3} Hz max {:.3} Hz, {:.2}% within {} Hz, raw transition error max {:.2} Hz",
                f.identified_windows,
                f.windows,
                f.cluster_mean_err_hz,
                f.cluster_max_err_hz,
                100.0 * f.within_tolerance_rate,
                f.tolerance_hz,
                f.raw_max_err_hz
            )
            .unwrap(),
            None => writeln!(o, "frequency: no identified windows").unwrap(),
        }
        match &self.model_order {
            Some(m) => writeln!(o, "model order: {}/{} windows correct ({:.2}%)", m.correct, m.windows, 100.0 * m.rate).unwrap(),
            None => writeln!(o, "model order: no pixel ground truth").unwrap(),
        }
        let d = &self.dead_reckoning;
        writeln!(
            o,
            "dead reckoning: {} (longest gap without a valid pose {:.3} s, timeout {:.3} s)",
            if d.flagged { "FLAGGED" } else { "no" },
            d.longest_gap_s,
            d.timeout_s
        )
        .unwrap();
        o
    }

    /// Whether every reported value is finite.
    pub fn is_finite(&self) -> bool {
        let v = serde_json::to_value(self).expect("report serialises");
        fn walk(v: &serde_json::Value) -> bool {
            match v {
                serde_json::Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
                serde_json::Value::Null => false,
                serde_json::Value::Array(a) => a.iter().all(walk),
                serde_json::Value::Object(m) => m.values().all(walk),
                _ => true,
            }
        }
        walk(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flickerloc::sim::PoseTruth;

    fn truth() -> TruthData {
        let poses = (0..=100)
            .map(|k| PoseTruth {
                t: k * 1_000,
                position: Vector3::new(k as f64 * 0.01, 1.0, 2.0),
                camera_attitude: UnitQuaternion::from_euler_angles(0.0, 0.0, k as f64 * 0.001),
            })
            .collect();
        TruthData { poses, pixels: Vec::new() }
    }

    fn row(t: Micros, p: Vector3<f64>, q: UnitQuaternion<f64>) -> PoseLogRow {
        let q = q.quaternion();
        PoseLogRow {
            t_us: t,
            tx: p.x,
            ty: p.y,
            tz: p.z,
            vx: 0.0,
            vy: 0.0,
            vz: 0.0,
            bx: 0.0,
            by: 0.0,
            bz: 0.0,
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            pnp_valid: 1,
        }
    }

    fn logs_with(offset: Vector3<f64>) -> RunLogs {
        let tr = truth();
        let poses = (0..20)
            .map(|k| {
                let t = 2_500 + k * 5_000;
                let gt = interpolate_pose(&tr.poses, t).unwrap();
                row(t, gt.position + offset, gt.camera_attitude)
            })
            .collect();
        RunLogs { poses, tracks: Vec::new(), windows: Vec::new() }
    }

    const OPTS: EvalOptions = EvalOptions { seed: 3, paper_literal: false, lost_timeout_s: 0.5 };

    #[test]
    fn exact_estimate_has_zero_error() {
        let r = evaluate(&logs_with(Vector3::zeros()), &truth(), OPTS).unwrap();
        assert!(r.position.max_m.norm < 1e-12);
        assert!(r.orientation.geodesic.max_deg < 1e-6);
        assert!(r.orientation.yaw.max_deg < 1e-6);
        assert_eq!(r.pose_samples, 20);
    }

    #[test]
    fn constant_offset_is_reported_per_axis() {
        let r = evaluate(&logs_with(Vector3::new(0.01, 0.0, 0.0)), &truth(), OPTS).unwrap();
        assert!((r.position.mean_m.x - 0.01).abs() < 1e-12);
        assert!((r.position.max_m.x - 0.01).abs() < 1e-12);
        assert!(r.position.mean_m.y < 1e-12 && r.position.max_m.z < 1e-12);
    }

    #[test]
    fn disjoint_logs_are_an_error() {
        let mut logs = logs_with(Vector3::zeros());
        for r in &mut logs.poses {
            r.t_us += 1_000_000;
        }
        assert!(evaluate(&logs, &truth(), OPTS).is_err());
    }

    #[test]
    fn long_gaps_flag_dead_reckoning() {
        let mut logs = logs_with(Vector3::zeros());
        assert!(!evaluate(&logs, &truth(), OPTS).unwrap().dead_reckoning.flagged);
        for r in &mut logs.poses[1..] {
            r.pnp_valid = 0;
        }
        let opts = EvalOptions { lost_timeout_s: 0.05, ..OPTS };
        let d = evaluate(&logs, &truth(), opts).unwrap().dead_reckoning;
        assert!(d.flagged);
        assert!((d.longest_gap_s - 0.095).abs() < 1e-12);
    }

    #[test]
    fn pixel_interpolation_requires_visibility() {
        let px = |u: f64, visible: bool| PixelTruth { id: 0, pixel: Vector2::new(u, 0.0), depth: 1.0, visible };
        let pixels = vec![(0, vec![px(0.0, true)]), (10, vec![px(10.0, true)]), (20, vec![px(20.0, false)])];
        assert_eq!(interpolate_pixel(&pixels, 0, 4), Some(Vector2::new(4.0, 0.0)));
        assert_eq!(interpolate_pixel(&pixels, 0, 10), Some(Vector2::new(10.0, 0.0)));
        assert_eq!(interpolate_pixel(&pixels, 0, 15), None);
        assert_eq!(interpolate_pixel(&pixels, 1, 4), None);
    }
}
