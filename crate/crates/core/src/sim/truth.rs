//! True poses and landmark image positions recorded by the simulator.

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::RelativePose;
use crate::error::{read_csv_rows, write_csv_rows, DataError};
use crate::events::Micros;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelTruth {
    pub id: u32,
    /// NaN when the landmark is behind the camera.
    pub pixel: Vector2<f64>,
    pub depth: f64,
    pub visible: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthSample {
    pub t: Micros,
    /// Camera position in the landmark frame.
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// `R_LC`: camera frame to landmark frame.
    pub camera_attitude: UnitQuaternion<f64>,
    /// `R_LB`: body frame to landmark frame.
    pub body_attitude: UnitQuaternion<f64>,
    pub landmarks: Vec<PixelTruth>,
}

impl TruthSample {
    pub fn pose(&self) -> RelativePose<f64> {
        RelativePose::new(self.camera_attitude, self.position)
    }

    pub fn visible_count(&self) -> usize {
        self.landmarks.iter().filter(|l| l.visible).count()
    }
}

/// Time-ordered ground truth with strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruthLog {
    pub samples: Vec<TruthSample>,
}

#[derive(Serialize, Deserialize)]
struct PoseRow {
    t_us: u64,
    tx: f64,
    ty: f64,
    tz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

#[derive(Serialize, Deserialize)]
struct PixelRow {
    t_us: u64,
    id: u32,
    u: f64,
    v: f64,
    depth: f64,
    visible: u8,
}

/// Pose-only ground truth as read back from disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseTruth {
    pub t: Micros,
    pub position: Vector3<f64>,
    pub camera_attitude: UnitQuaternion<f64>,
}

impl GroundTruthLog {
    /// Writes `t_us,tx,ty,tz,qw,qx,qy,qz` with the camera-to-landmark rotation.
    pub fn write_pose_csv(&self, path: &Path) -> Result<(), DataError> {
        let rows: Vec<PoseRow> = self
            .samples
            .iter()
            .map(|s| {
                let q = s.camera_attitude.quaternion();
                PoseRow {
                    t_us: s.t,
                    tx: s.position.x,
                    ty: s.position.y,
                    tz: s.position.z,
                    qw: q.w,
                    qx: q.i,
                    qy: q.j,
                    qz: q.k,
                }
            })
            .collect();
        write_csv_rows(path, &rows)
    }

    /// Writes `t_us,id,u,v,depth,visible`, one row per landmark and sample.
    pub fn write_pixel_csv(&self, path: &Path) -> Result<(), DataError> {
        let rows: Vec<PixelRow> = self
            .samples
            .iter()
            .flat_map(|s| {
                s.landmarks.iter().map(move |l| PixelRow {
                    t_us: s.t,
                    id: l.id,
                    u: l.pixel.x,
                    v: l.pixel.y,
                    depth: l.depth,
                    visible: u8::from(l.visible),
                })
            })
            .collect();
        write_csv_rows(path, &rows)
    }

    pub fn poses(&self) -> Vec<PoseTruth> {
        self.samples
            .iter()
            .map(|s| PoseTruth {
                t: s.t,
                position: s.position,
                camera_attitude: s.camera_attitude,
            })
            .collect()
    }

    /// Sample whose timestamp is nearest to `t`.
    pub fn nearest(&self, t: Micros) -> Option<&TruthSample> {
        nearest_by(&self.samples, t, |s| s.t)
    }
}

pub fn read_pose_csv(path: &Path) -> Result<Vec<PoseTruth>, DataError> {
    let rows: Vec<PoseRow> = read_csv_rows(path)?;
    Ok(rows
        .into_iter()
        .map(|r| PoseTruth {
            t: r.t_us,
            position: Vector3::new(r.tx, r.ty, r.tz),
            camera_attitude: UnitQuaternion::from_quaternion(Quaternion::new(r.qw, r.qx, r.qy, r.qz)),
        })
        .collect())
}

/// Pixel truth rows grouped by timestamp.
pub fn read_pixel_csv(path: &Path) -> Result<Vec<(Micros, Vec<PixelTruth>)>, DataError> {
    let rows: Vec<PixelRow> = read_csv_rows(path)?;
    let mut out: Vec<(Micros, Vec<PixelTruth>)> = Vec::new();
    for r in rows {
        let p = PixelTruth {
            id: r.id,
            pixel: Vector2::new(r.u, r.v),
            depth: r.depth,
            visible: r.visible != 0,
        };
        match out.last_mut() {
            Some((t, v)) if *t == r.t_us => v.push(p),
            _ => out.push((r.t_us, vec![p])),
        }
    }
    Ok(out)
}

/// Pose truth interpolated at `t`: linear in position, spherical in rotation.
pub fn interpolate_pose(poses: &[PoseTruth], t: Micros) -> Option<PoseTruth> {
    let k = poses.partition_point(|p| p.t <= t);
    if k == 0 {
        return poses.first().filter(|p| p.t == t).copied();
    }
    let a = &poses[k - 1];
    if a.t == t || k == poses.len() {
        return (a.t == t).then_some(*a);
    }
    let b = &poses[k];
    let w = (t - a.t) as f64 / (b.t - a.t) as f64;
    Some(PoseTruth {
        t,
        position: a.position.lerp(&b.position, w),
        camera_attitude: a.camera_attitude.slerp(&b.camera_attitude, w),
    })
}

pub fn nearest_by<S>(items: &[S], t: Micros, key: impl Fn(&S) -> Micros) -> Option<&S> {
    let k = items.partition_point(|s| key(s) < t);
    let after = items.get(k);
    let before = k.checked_sub(1).and_then(|i| items.get(i));
    match (before, after) {
        (Some(b), Some(a)) => Some(if t - key(b) <= key(a) - t { b } else { a }),
        (b, a) => b.or(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pose(t: Micros, x: f64, yaw: f64) -> PoseTruth {
        PoseTruth {
            t,
            position: Vector3::new(x, 0.0, 0.0),
            camera_attitude: UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
        }
    }

    #[test]
    fn interpolation() {
        let ps = [pose(0, 0.0, 0.0), pose(1000, 1.0, 0.2)];
        let m = interpolate_pose(&ps, 250).unwrap();
        assert_relative_eq!(m.position.x, 0.25);
        assert_relative_eq!(m.camera_attitude.euler_angles().2, 0.05, epsilon = 1e-12);
        assert_eq!(interpolate_pose(&ps, 1000).unwrap().position.x, 1.0);
        assert!(interpolate_pose(&ps, 1001).is_none());
    }

    #[test]
    fn nearest() {
        let v = [0u64, 10, 20];
        assert_eq!(nearest_by(&v, 14, |x| *x), Some(&10));
        assert_eq!(nearest_by(&v, 16, |x| *x), Some(&20));
        assert_eq!(nearest_by(&v, 99, |x| *x), Some(&20));
    }
}
