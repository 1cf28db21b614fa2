//! Soft time synchronisation of the event and IMU clocks.

use flickerloc::events::Micros;
use flickerloc::sim::ImuSample;

use crate::PipelineError;

/// IMU samples on the camera clock and the interval both streams cover.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncedStreams {
    /// IMU samples restamped to the camera clock, in time order.
    pub imu: Vec<ImuSample>,
    /// Start of the common interval (µs, camera clock).
    pub start: Micros,
    /// End of the common interval (µs, camera clock).
    pub end: Micros,
}

impl SyncedStreams {
    /// Latest IMU sample stamped at or before `t`.
    pub fn imu_at(&self, t: Micros) -> Option<&ImuSample> {
        let k = self.imu.partition_point(|s| s.t <= t);
        k.checked_sub(1).map(|i| &self.imu[i])
    }
}

fn offset_us(offset_ms: f64) -> i64 {
    (offset_ms * 1e3).round() as i64
}

fn is_monotone(t: &[Micros]) -> bool {
    t.windows(2).all(|w| w[0] <= w[1])
}

/// Moves IMU stamps onto the camera clock by subtracting `offset_ms` and
/// returns the interval covered by both streams. Samples that would precede
/// the camera epoch are dropped.
pub fn synchronize(event_times: &[Micros], imu: &[ImuSample], offset_ms: f64) -> Result<SyncedStreams, PipelineError> {
    if !offset_ms.is_finite() {
        return Err(PipelineError::Config("clock offset must be finite".into()));
    }
    let imu_t: Vec<Micros> = imu.iter().map(|s| s.t).collect();
    if !is_monotone(event_times) || !is_monotone(&imu_t) {
        return Err(PipelineError::Config("event and IMU timestamps must be non-decreasing".into()));
    }
    let off = offset_us(offset_ms);
    let shifted: Vec<ImuSample> = imu
        .iter()
        .filter_map(|s| {
            let t = s.t as i64 - off;
            (t >= 0).then_some(ImuSample { t: t as Micros, ..*s })
        })
        .collect();
    let (Some(&e0), Some(&e1)) = (event_times.first(), event_times.last()) else {
        return Err(PipelineError::Config("event stream is empty".into()));
    };
    let (Some(i0), Some(i1)) = (shifted.first(), shifted.last()) else {
        return Err(PipelineError::Config("IMU stream is empty after applying the clock offset".into()));
    };
    let start = e0.max(i0.t);
    let end = e1.min(i1.t);
    if start >= end {
        return Err(PipelineError::Config(format!(
            "event stream [{e0}, {e1}] µs and IMU stream [{}, {}] µs do not overlap",
            i0.t, i1.t
        )));
    }
    Ok(SyncedStreams { imu: shifted, start, end })
}

/// Estimates the IMU clock lead from a step test: both streams are reduced
/// to activity signals on a `bin_us` grid, differentiated so the onset
/// dominates, and cross-correlated over lags up to `max_lag_us`. Returns the
/// offset in milliseconds to pass to [`synchronize`].
///
/// `imu_activity` pairs each IMU stamp with a scalar such as the deviation
/// of the specific force from its resting value.
pub fn estimate_clock_offset(
    event_times: &[Micros],
    imu_activity: &[(Micros, f64)],
    bin_us: Micros,
    max_lag_us: Micros,
) -> Option<f64> {
    if bin_us == 0 || event_times.is_empty() || imu_activity.len() < 2 {
        return None;
    }
    let t0 = event_times[0].min(imu_activity[0].0);
    let t1 = event_times[event_times.len() - 1].max(imu_activity[imu_activity.len() - 1].0);
    let n = ((t1 - t0) / bin_us + 1) as usize;
    let mut ev = vec![0.0; n];
    for &t in event_times {
        ev[((t - t0) / bin_us) as usize] += 1.0;
    }
    let imu: Vec<f64> = (0..n)
        .map(|k| {
            let t = t0 + k as Micros * bin_us;
            let j = imu_activity.partition_point(|s| s.0 <= t);
            match (j.checked_sub(1).map(|i| imu_activity[i]), imu_activity.get(j)) {
                (Some(a), Some(b)) => a.1 + (b.1 - a.1) * (t - a.0) as f64 / (b.0 - a.0) as f64,
                (Some(a), None) => a.1,
                (None, Some(b)) => b.1,
                (None, None) => 0.0,
            }
        })
        .collect();
    let de = normalized_diff(&ev)?;
    let di = normalized_diff(&imu)?;
    let max_lag = (max_lag_us / bin_us) as i64;
    let mut best = (f64::NEG_INFINITY, 0i64);
    for lag in -max_lag..=max_lag {
        // Positive lag: the IMU onset appears `lag` bins after the events.
        let mut s = 0.0;
        for (k, &e) in de.iter().enumerate() {
            let j = k as i64 + lag;
            if j >= 0 && (j as usize) < di.len() {
                s += e * di[j as usize];
            }
        }
        if s > best.0 {
            best = (s, lag);
        }
    }
    Some(best.1 as f64 * bin_us as f64 / 1e3)
}

fn normalized_diff(x: &[f64]) -> Option<Vec<f64>> {
    let d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = d.iter().sum::<f64>() / d.len().max(1) as f64;
    let d: Vec<f64> = d.iter().map(|v| v - mean).collect();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > 0.0).then(|| d.iter().map(|v| v / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn imu(ts: &[Micros]) -> Vec<ImuSample> {
        ts.iter().map(|&t| ImuSample { t, accel: Vector3::zeros(), gyro: Vector3::zeros() }).collect()
    }

    #[test]
    fn zero_offset_is_identity() {
        let samples = imu(&[0, 5_000, 10_000]);
        let s = synchronize(&[0, 3_000, 9_000], &samples, 0.0).unwrap();
        assert_eq!(s.imu, samples);
        assert_eq!((s.start, s.end), (0, 9_000));
    }

    #[test]
    fn offset_moves_imu_back() {
        let s = synchronize(&[0, 20_000], &imu(&[5_000, 10_000, 15_000]), 3.2).unwrap();
        let t: Vec<Micros> = s.imu.iter().map(|x| x.t).collect();
        assert_eq!(t, vec![1_800, 6_800, 11_800]);
        assert_eq!(s.imu_at(6_799).unwrap().t, 1_800);
        assert_eq!(s.imu_at(6_800).unwrap().t, 6_800);
        assert!(s.imu_at(1_000).is_none());
    }

    #[test]
    fn disjoint_streams_are_rejected() {
        let err = synchronize(&[0, 1_000], &imu(&[50_000, 60_000]), 0.0).unwrap_err();
        assert!(err.to_string().contains("overlap"));
    }

    #[test]
    fn unsorted_streams_are_rejected() {
        assert!(synchronize(&[5, 1], &imu(&[0, 10]), 0.0).is_err());
    }

    #[test]
    fn step_test_recovers_offset() {
        // Events start at 100 ms on the camera clock; the IMU, leading by
        // 3.2 ms and sampled at 1 kHz, sees the same step at 103.2 ms.
        let events: Vec<Micros> = (0..2_000).map(|k| 100_000 + k * 50).collect();
        let activity: Vec<(Micros, f64)> = (0..300)
            .map(|k| {
                let t = k * 1_000;
                (t, if t as f64 >= 103_200.0 { 1.0 } else { 0.0 })
            })
            .collect();
        let est = estimate_clock_offset(&events, &activity, 100, 20_000).unwrap();
        assert!((est - 3.2).abs() <= 1.0, "{est}");
    }
}
