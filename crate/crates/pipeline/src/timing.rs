//! Per-stage wall-clock timing.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Processing stages in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Transitions,
    Clustering,
    Ltkf,
    Madgwick,
    Pnp,
    Tdkf,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Transitions, Stage::Clustering, Stage::Ltkf, Stage::Madgwick, Stage::Pnp, Stage::Tdkf];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Transitions => "Polarity transition detection",
            Stage::Clustering => "Clustering of polarity transitions",
            Stage::Ltkf => "LTKF",
            Stage::Madgwick => "Madgwick filter",
            Stage::Pnp => "PnP",
            Stage::Tdkf => "TDKF",
        }
    }
}

/// Accumulated time and call count per stage.
#[derive(Clone, Debug, Default)]
pub struct StageTimer {
    total: [Duration; 6],
    calls: [u64; 6],
}

impl StageTimer {
    /// Runs `f`, charging its duration to `stage`.
    pub fn time<R>(&mut self, stage: Stage, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let r = f();
        self.add(stage, start.elapsed());
        r
    }

    pub fn add(&mut self, stage: Stage, d: Duration) {
        let i = stage as usize;
        self.total[i] += d;
        self.calls[i] += 1;
    }

    pub fn report(&self) -> TimingReport {
        let stages: Vec<StageTiming> = Stage::ALL
            .iter()
            .map(|&s| {
                let i = s as usize;
                let mean_ms = if self.calls[i] == 0 {
                    0.0
                } else {
                    self.total[i].as_secs_f64() * 1e3 / self.calls[i] as f64
                };
                StageTiming { stage: s, calls: self.calls[i], mean_ms }
            })
            .collect();
        let total_ms = stages.iter().map(|s| s.mean_ms).sum();
        TimingReport { stages, total_ms }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub calls: u64,
    /// Mean wall-clock time per call (ms).
    pub mean_ms: f64,
}

/// Mean execution time per block; the total is the sum of the means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub stages: Vec<StageTiming>,
    pub total_ms: f64,
}

impl TimingReport {
    pub fn get(&self, stage: Stage) -> Option<&StageTiming> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    /// Share of the total taken by `stage`.
    pub fn fraction(&self, stage: Stage) -> f64 {
        match self.get(stage) {
            Some(s) if self.total_ms > 0.0 => s.mean_ms / self.total_ms,
            _ => 0.0,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<36} {:>12} {:>10}", "Block", "Time (ms)", "Calls").unwrap();
        for s in &self.stages {
            writeln!(out, "{:<36} {:>12.4} {:>10}", s.stage.label(), s.mean_ms, s.calls).unwrap();
        }
        writeln!(out, "{:<36} {:>12.4}", "Total", self.total_ms).unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_fixed_rows_and_sums() {
        let mut t = StageTimer::default();
        t.add(Stage::Clustering, Duration::from_micros(300));
        t.add(Stage::Clustering, Duration::from_micros(100));
        t.add(Stage::Tdkf, Duration::from_micros(50));
        let r = t.report();
        let names: Vec<Stage> = r.stages.iter().map(|s| s.stage).collect();
        assert_eq!(names, Stage::ALL);
        assert!((r.get(Stage::Clustering).unwrap().mean_ms - 0.2).abs() < 1e-12);
        assert!((r.total_ms - 0.25).abs() < 1e-12);
        assert!((r.fraction(Stage::Clustering) - 0.8).abs() < 1e-12);
        let text = r.to_text();
        assert_eq!(text.lines().count(), 8);
        assert!(text.lines().last().unwrap().starts_with("Total"));
    }
}
