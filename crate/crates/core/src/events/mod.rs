//! Event-stream data model, per-pixel polarity-transition detection and the
//! sliding transition-frequency window.
//!
//! A polarity transition is an OFF event followed at the same pixel by an ON
//! event less than `tau / 2` later. Its frequency is `1 / (2 dt)`, so a window
//! of length `tau` can only resolve frequencies at or above `1 / tau`.

mod io;

pub use io::{read_events, read_events_binary, read_events_csv, write_events_binary, write_events_csv};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Microsecond timestamp.
pub type Micros = u64;

/// Microseconds per second.
pub const MICROS_PER_SEC: f64 = 1e6;

/// Default window length (10 ms, i.e. a 100 Hz frequency detection resolution).
pub const DEFAULT_TAU_US: Micros = 10_000;

/// Event polarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    /// Log-intensity decrease, encoded as `-1`.
    Off,
    /// Log-intensity increase, encoded as `+1`.
    On,
}

impl Polarity {
    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Off => -1,
            Polarity::On => 1,
        }
    }

    pub fn from_i8(p: i8) -> Option<Self> {
        match p {
            -1 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }
}

/// Sensor resolution in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorSize {
    pub width: u16,
    pub height: u16,
}

impl SensorSize {
    pub const fn new(width: u16, height: u16) -> Self {
        Self { width, height }
    }

    #[inline]
    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    fn index(&self, x: u16, y: u16) -> usize {
        y as usize * self.width as usize + x as usize
    }
}

impl Default for SensorSize {
    fn default() -> Self {
        Self::new(640, 480)
    }
}

/// A single sensor event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub t: Micros,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: Micros, x: u16, y: u16, p: Polarity) -> Self {
        Self { t, x, y, p }
    }

    /// Canonical stream order: time, then row, then column.
    pub fn canonical_key(&self) -> (Micros, u16, u16) {
        (self.t, self.y, self.x)
    }
}

/// An OFF event paired with the following ON event at the same pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarityTransition {
    pub x: u16,
    pub y: u16,
    /// Timestamp of the OFF event.
    pub t_off: Micros,
    /// Timestamp of the ON event.
    pub t_on: Micros,
    /// `t_on - t_off` in seconds.
    pub dt: f64,
    /// Transition frequency `1 / (2 dt)` in Hz.
    pub f: f64,
}

impl PolarityTransition {
    /// Builds a transition from its edge timestamps. `t_on` must be strictly later.
    pub fn new(x: u16, y: u16, t_off: Micros, t_on: Micros) -> Self {
        debug_assert!(t_on > t_off);
        let dt = (t_on - t_off) as f64 / MICROS_PER_SEC;
        Self {
            x,
            y,
            t_off,
            t_on,
            dt,
            f: 1.0 / (2.0 * dt),
        }
    }
}

/// Counters for events dropped by the detector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorStats {
    pub accepted: u64,
    pub out_of_bounds: u64,
    pub non_monotone: u64,
    pub transitions: u64,
}

/// Single-pass per-pixel transition detector.
///
/// Each pixel remembers only its latest event. An ON event that follows an OFF
/// within `tau / 2` emits a transition and replaces the OFF, so one OFF event
/// can never pair with two ONs.
#[derive(Clone, Debug)]
pub struct TransitionDetector {
    size: SensorSize,
    tau_us: Micros,
    last: Vec<Option<(Polarity, Micros)>>,
    stats: DetectorStats,
}

impl TransitionDetector {
    pub fn new(size: SensorSize, tau_us: Micros) -> Self {
        assert!(tau_us > 0, "window length must be positive");
        Self {
            size,
            tau_us,
            last: vec![None; size.pixel_count()],
            stats: DetectorStats::default(),
        }
    }

    pub fn tau_us(&self) -> Micros {
        self.tau_us
    }

    pub fn stats(&self) -> DetectorStats {
        self.stats
    }

    /// Feeds one event, returning the transition it completes, if any.
    pub fn push(&mut self, e: &Event) -> Option<PolarityTransition> {
        if !self.size.contains(e.x, e.y) {
            self.stats.out_of_bounds += 1;
            return None;
        }
        let slot = &mut self.last[self.size.index(e.x, e.y)];
        let mut out = None;
        if let Some((prev_p, prev_t)) = *slot {
            if e.t < prev_t {
                self.stats.non_monotone += 1;
                return None;
            }
            let dt = e.t - prev_t;
            if prev_p == Polarity::Off && e.p == Polarity::On && dt > 0 && 2 * dt < self.tau_us {
                out = Some(PolarityTransition::new(e.x, e.y, prev_t, e.t));
                self.stats.transitions += 1;
            }
        }
        *slot = Some((e.p, e.t));
        self.stats.accepted += 1;
        out
    }

    /// Feeds a batch, appending completed transitions to `out`.
    pub fn extend_into(&mut self, events: &[Event], out: &mut Vec<PolarityTransition>) {
        out.extend(events.iter().filter_map(|e| self.push(e)));
    }
}

/// Runs a fresh detector over a whole stream.
pub fn detect_transitions(
    events: &[Event],
    size: SensorSize,
    tau_us: Micros,
) -> (Vec<PolarityTransition>, DetectorStats) {
    let mut det = TransitionDetector::new(size, tau_us);
    let mut out = Vec::new();
    det.extend_into(events, &mut out);
    (out, det.stats())
}

/// The set `D` of transitions whose ON edge lies in `(t_now - tau, t_now]`,
/// together with their frequencies `F`.
#[derive(Clone, Debug, Default)]
pub struct TransitionWindow {
    tau_us: Micros,
    t_now: Micros,
    items: Vec<PolarityTransition>,
    pending: VecDeque<PolarityTransition>,
}

impl TransitionWindow {
    pub fn new(tau_us: Micros) -> Self {
        assert!(tau_us > 0, "window length must be positive");
        Self {
            tau_us,
            ..Self::default()
        }
    }

    pub fn tau_us(&self) -> Micros {
        self.tau_us
    }

    pub fn t_now(&self) -> Micros {
        self.t_now
    }

    /// Minimum resolvable frequency `1 / tau` in Hz.
    pub fn detection_resolution_hz(&self) -> f64 {
        MICROS_PER_SEC / self.tau_us as f64
    }

    pub fn transitions(&self) -> &[PolarityTransition] {
        &self.items
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.items.iter().map(|d| d.f).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Adds `new` and moves the window close to `t_now`. Transitions stamped
    /// after `t_now` are held back until a later advance covers them.
    pub fn advance(&mut self, new: impl IntoIterator<Item = PolarityTransition>, t_now: Micros) {
        assert!(t_now >= self.t_now, "window time must not go backwards");
        self.t_now = t_now;
        // Every ON edge is stamped after its OFF edge, so t_on >= 1 and the
        // saturated lower bound is exact before the first full window.
        let lower = t_now.saturating_sub(self.tau_us);
        let in_range = move |d: &PolarityTransition| d.t_on <= t_now && d.t_on > lower;

        let mut held = VecDeque::with_capacity(self.pending.len());
        for d in self.pending.drain(..).chain(new) {
            if d.t_on > t_now {
                held.push_back(d);
            } else if in_range(&d) {
                self.items.push(d);
            }
        }
        self.pending = held;
        self.items.retain(|d| in_range(d));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: Micros, x: u16, y: u16, p: i8) -> Event {
        Event::new(t, x, y, Polarity::from_i8(p).unwrap())
    }

    #[test]
    fn empty_stream_gives_no_transitions() {
        let (d, stats) = detect_transitions(&[], SensorSize::default(), DEFAULT_TAU_US);
        assert!(d.is_empty());
        assert_eq!(stats, DetectorStats::default());
    }

    #[test]
    fn slow_pair_is_rejected() {
        // 6 ms is not below tau / 2 = 5 ms.
        let evs = [ev(0, 10, 10, -1), ev(6_000, 10, 10, 1)];
        let (d, _) = detect_transitions(&evs, SensorSize::default(), DEFAULT_TAU_US);
        assert!(d.is_empty());
    }

    #[test]
    fn one_millisecond_pair_is_500_hz() {
        let evs = [ev(0, 10, 10, -1), ev(1_000, 10, 10, 1)];
        let (d, _) = detect_transitions(&evs, SensorSize::default(), DEFAULT_TAU_US);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].f, 500.0);
        assert_eq!(d[0].dt, 0.001);
        assert_eq!((d[0].t_off, d[0].t_on), (0, 1_000));
    }

    #[test]
    fn off_event_is_consumed() {
        let evs = [ev(0, 1, 1, -1), ev(1_000, 1, 1, 1), ev(1_500, 1, 1, 1)];
        let (d, _) = detect_transitions(&evs, SensorSize::default(), DEFAULT_TAU_US);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn on_then_off_and_same_polarity_do_not_pair() {
        let evs = [
            ev(0, 1, 1, 1),
            ev(100, 1, 1, -1),
            ev(200, 1, 1, -1),
            ev(300, 1, 1, 1),
        ];
        let (d, _) = detect_transitions(&evs, SensorSize::default(), DEFAULT_TAU_US);
        // Only the second OFF pairs with the ON.
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].t_off, 200);
    }

    #[test]
    fn pixels_are_independent() {
        let evs = [ev(0, 1, 1, -1), ev(10, 2, 1, 1), ev(1_000, 1, 1, 1)];
        let (d, _) = detect_transitions(&evs, SensorSize::default(), DEFAULT_TAU_US);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].x, d[0].y), (1, 1));
    }

    #[test]
    fn bad_events_are_counted() {
        let size = SensorSize::new(4, 4);
        let evs = [ev(0, 9, 0, -1), ev(500, 0, 0, -1), ev(400, 0, 0, 1), ev(900, 0, 0, 1)];
        let (d, stats) = detect_transitions(&evs, size, DEFAULT_TAU_US);
        assert_eq!(stats.out_of_bounds, 1);
        assert_eq!(stats.non_monotone, 1);
        assert_eq!(stats.accepted, 2);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].t_off, 500);
    }

    #[test]
    fn simultaneous_pair_is_not_a_transition() {
        let evs = [ev(100, 0, 0, -1), ev(100, 0, 0, 1)];
        let (d, _) = detect_transitions(&evs, SensorSize::default(), DEFAULT_TAU_US);
        assert!(d.is_empty());
    }

    #[test]
    fn window_evicts_at_boundary() {
        let mut w = TransitionWindow::new(10_000);
        w.advance([PolarityTransition::new(0, 0, 0, 1)], 1);
        assert_eq!(w.len(), 1);
        w.advance([], 11_000);
        assert!(w.is_empty());
    }

    #[test]
    fn window_keeps_half_open_interval() {
        let mut w = TransitionWindow::new(10_000);
        let d = |t_on| PolarityTransition::new(0, 0, t_on - 1_000, t_on);
        w.advance([d(10_000), d(15_000), d(20_000), d(20_001)], 20_000);
        let on: Vec<_> = w.transitions().iter().map(|d| d.t_on).collect();
        assert_eq!(on, vec![15_000, 20_000]);
        // The future transition is released once the window reaches it.
        w.advance([], 25_000);
        let on: Vec<_> = w.transitions().iter().map(|d| d.t_on).collect();
        assert_eq!(on, vec![20_000, 20_001]);
        assert_eq!(w.frequencies().len(), w.len());
        assert_eq!(w.detection_resolution_hz(), 100.0);
    }

    #[test]
    fn steady_square_wave_fills_window() {
        // A 500 Hz square wave on k pixels: edges every 1 ms, OFF at odd ms.
        let k = 6u16;
        let mut evs = Vec::new();
        for i in 0..40u64 {
            let p = if i % 2 == 0 { 1 } else { -1 };
            for x in 0..k {
                evs.push(ev(i * 1_000, x, 0, p));
            }
        }
        let (d, _) = detect_transitions(&evs, SensorSize::default(), DEFAULT_TAU_US);
        let mut w = TransitionWindow::new(DEFAULT_TAU_US);
        w.advance(d, 30_000);
        assert_eq!(w.len(), k as usize * (0.010f64 * 500.0).floor() as usize);
        assert!(w.frequencies().iter().all(|&f| f == 500.0));
    }
}
