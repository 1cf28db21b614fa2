//! Analytic camera-carrier trajectories in the landmark frame.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::frames::{body_rates_from_euler, from_roll_pitch_yaw};

/// Pose and derivatives of the body frame at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    /// Body (and camera) origin in the landmark frame (m).
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    /// `R_LB`: body frame to landmark frame.
    pub attitude: UnitQuaternion<f64>,
    /// Body angular velocity expressed in the body frame (rad/s).
    pub body_rate: Vector3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t_s: f64,
    pub position: [f64; 3],
    /// Roll, pitch, yaw in degrees.
    #[serde(default)]
    pub rpy_deg: [f64; 3],
}

/// Take-off to a hover point followed by an optional constant yaw-rate segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoverSpec {
    /// Hover point in the landmark frame (m).
    pub position: [f64; 3],
    pub yaw_deg: f64,
    /// Height gained during take-off; the run starts this far below `position`.
    pub climb_m: f64,
    pub climb_time_s: f64,
    pub yaw_rate_deg_s: f64,
    pub yaw_rate_start_s: f64,
    /// End of the yaw-rate segment; unbounded when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yaw_rate_stop_s: Option<f64>,
}

impl Default for HoverSpec {
    fn default() -> Self {
        Self {
            position: [-4.0, 0.0, 0.6],
            yaw_deg: 0.0,
            climb_m: 0.3,
            climb_time_s: 2.0,
            yaw_rate_deg_s: 0.0,
            yaw_rate_start_s: 0.0,
            yaw_rate_stop_s: None,
        }
    }
}

/// Horizontal square flown at constant height, corner to corner with smooth
/// starts and stops and a short hold at every corner. The heading alternates
/// by `yaw_deg` between corners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SquareSpec {
    pub center: [f64; 3],
    pub side_m: f64,
    pub side_time_s: f64,
    pub hold_s: f64,
    pub start_hold_s: f64,
    pub yaw_deg: f64,
    pub laps: usize,
}

impl Default for SquareSpec {
    fn default() -> Self {
        Self {
            center: [-5.5, 0.0, 0.6],
            side_m: 1.5,
            side_time_s: 4.0,
            hold_s: 1.0,
            start_hold_s: 2.0,
            yaw_deg: 2.0,
            laps: 1,
        }
    }
}

impl SquareSpec {
    pub fn waypoints(&self) -> Vec<Waypoint> {
        let h = self.side_m / 2.0;
        let [cx, cy, cz] = self.center;
        // Far-left, far-right, near-right, near-left as seen from the landmarks.
        let corners = [(-h, -h), (-h, h), (h, h), (h, -h)];
        let mut out = Vec::new();
        let mut t = 0.0;
        let mut push = |t: f64, k: usize| {
            let (dx, dy) = corners[k % 4];
            let yaw = if k % 2 == 0 { self.yaw_deg } else { -self.yaw_deg };
            out.push(Waypoint {
                t_s: t,
                position: [cx + dx, cy + dy, cz],
                rpy_deg: [0.0, 0.0, yaw],
            });
        };
        push(t, 0);
        t += self.start_hold_s;
        push(t, 0);
        for k in 1..=4 * self.laps {
            t += self.side_time_s;
            push(t, k);
            t += self.hold_s;
            push(t, k);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    pub points: Vec<Waypoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrajectorySpec {
    Hover(HoverSpec),
    Square(SquareSpec),
    Waypoints(WaypointSpec),
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec::Square(SquareSpec::default())
    }
}

/// Quintic blend `s(u)` with zero first and second derivatives at both ends.
/// Returns `(s, ds/du, d2s/du2)`.
fn quintic(u: f64) -> (f64, f64, f64) {
    let u = u.clamp(0.0, 1.0);
    let u2 = u * u;
    let u3 = u2 * u;
    (
        u3 * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (1.0 - 2.0 * u + u2),
        60.0 * u * (1.0 - 3.0 * u + 2.0 * u2),
    )
}

fn state_from(t: f64, p: [Vector3<f64>; 3], euler: [Vector3<f64>; 2]) -> TrajectoryState {
    let [ang, rate] = euler;
    TrajectoryState {
        t,
        position: p[0],
        velocity: p[1],
        acceleration: p[2],
        attitude: from_roll_pitch_yaw(ang.x, ang.y, ang.z),
        body_rate: body_rates_from_euler(ang, rate),
    }
}

impl TrajectorySpec {
    /// Samples the trajectory. Times before the start or after the last
    /// waypoint hold the boundary pose.
    pub fn state(&self, t: f64) -> TrajectoryState {
        match self {
            TrajectorySpec::Hover(h) => hover_state(h, t),
            TrajectorySpec::Square(s) => waypoint_state(&s.waypoints(), t),
            TrajectorySpec::Waypoints(w) => waypoint_state(&w.points, t),
        }
    }

    /// Time at which the trajectory comes to its final rest, if it has one.
    pub fn natural_duration(&self) -> Option<f64> {
        match self {
            TrajectorySpec::Hover(_) => None,
            TrajectorySpec::Square(s) => s.waypoints().last().map(|w| w.t_s),
            TrajectorySpec::Waypoints(w) => w.points.last().map(|w| w.t_s),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let check = |pts: &[Waypoint]| {
            if pts.is_empty() {
                return Err("waypoint list is empty".to_string());
            }
            if pts.windows(2).any(|w| w[1].t_s < w[0].t_s) {
                return Err("waypoint times must be non-decreasing".to_string());
            }
            Ok(())
        };
        match self {
            TrajectorySpec::Hover(h) => {
                if h.climb_time_s < 0.0 || h.yaw_rate_stop_s.is_some_and(|s| s < h.yaw_rate_start_s) {
                    return Err("hover times are inconsistent".to_string());
                }
                Ok(())
            }
            TrajectorySpec::Square(s) => {
                if s.side_time_s <= 0.0 || s.hold_s < 0.0 || s.start_hold_s < 0.0 || s.laps == 0 {
                    return Err("square timing must be positive with at least one lap".to_string());
                }
                check(&s.waypoints())
            }
            TrajectorySpec::Waypoints(w) => check(&w.points),
        }
    }
}

fn hover_state(h: &HoverSpec, t: f64) -> TrajectoryState {
    let top = Vector3::from(h.position);
    let (s, ds, dds) = if h.climb_time_s > 0.0 {
        let (s, ds, dds) = quintic(t / h.climb_time_s);
        (s, ds / h.climb_time_s, dds / (h.climb_time_s * h.climb_time_s))
    } else {
        (1.0, 0.0, 0.0)
    };
    let up = Vector3::z() * h.climb_m;
    let p = [top - up * (1.0 - s), up * ds, up * dds];
    let rate = h.yaw_rate_deg_s.to_radians();
    let stop = h.yaw_rate_stop_s.unwrap_or(f64::INFINITY);
    let active = t.clamp(h.yaw_rate_start_s, stop) - h.yaw_rate_start_s;
    let yaw = h.yaw_deg.to_radians() + rate * active;
    let yaw_rate = if t >= h.yaw_rate_start_s && t < stop { rate } else { 0.0 };
    state_from(t, p, [Vector3::new(0.0, 0.0, yaw), Vector3::new(0.0, 0.0, yaw_rate)])
}

fn waypoint_state(pts: &[Waypoint], t: f64) -> TrajectoryState {
    let to_rad = |w: &Waypoint| Vector3::from(w.rpy_deg).map(f64::to_radians);
    let first = &pts[0];
    let last = &pts[pts.len() - 1];
    let rest = |w: &Waypoint| {
        state_from(
            t,
            [Vector3::from(w.position), Vector3::zeros(), Vector3::zeros()],
            [to_rad(w), Vector3::zeros()],
        )
    };
    if t <= first.t_s {
        return rest(first);
    }
    if t >= last.t_s {
        return rest(last);
    }
    let k = pts.partition_point(|w| w.t_s <= t) - 1;
    let (a, b) = (&pts[k], &pts[k + 1]);
    let dur = b.t_s - a.t_s;
    if dur <= 0.0 {
        return rest(b);
    }
    let (s, ds, dds) = quintic((t - a.t_s) / dur);
    let (ds, dds) = (ds / dur, dds / (dur * dur));
    let dp = Vector3::from(b.position) - Vector3::from(a.position);
    let da = to_rad(b) - to_rad(a);
    state_from(
        t,
        [Vector3::from(a.position) + dp * s, dp * ds, dp * dds],
        [to_rad(a) + da * s, da * ds],
    )
}
