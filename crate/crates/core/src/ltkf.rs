//! Image-plane landmark tracking.
//!
//! Each identified landmark gets a two-state Kalman filter over its pixel
//! centre. Predictions integrate the pixel velocity given by the interaction
//! matrix and the camera twist; identified centroids correct the state.

use std::path::Path;

use nalgebra::{Matrix2, Matrix2x6, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraModel;
use crate::error::{write_csv_rows, DataError};
use crate::events::Micros;
use crate::gmm::NvbmFrame;
use crate::kalman::{is_spd, joseph_update, KalmanError, UpdateOutcome};
use crate::scalar::Real;

/// χ² quantile for two degrees of freedom at 0.997.
pub const GATE_CHI2_2DOF: f64 = 11.829;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtkfError {
    #[error("landmark depth must be positive, got {0}")]
    InvalidDepth(f64),
    #[error("invalid tracker configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kalman(#[from] KalmanError),
}

/// `L_s` for a pixel `c` at depth `z`. Pixel coordinates enter relative to the
/// principal point; the twist is the camera's linear then angular velocity in
/// the camera frame.
pub fn interaction_matrix<T: Real>(c: &Vector2<T>, z: T, cam: &CameraModel<T>) -> Result<Matrix2x6<T>, LtkfError> {
    if !(z > T::zero()) {
        return Err(LtkfError::InvalidDepth(z.as_f64()));
    }
    let u = c.x - cam.u0;
    let v = c.y - cam.v0;
    let (fu, fv) = (cam.fu, cam.fv);
    let o = T::zero();
    #[rustfmt::skip]
    let l = Matrix2x6::new(
        -fu / z, o, u / z, u * v / fv, -fu - u * u / fu, fu / fv * v,
        o, -fv / z, v / z, fv + v * v / fv, -u * v / fu, -fv / fu * u,
    );
    Ok(l)
}

/// Pixel velocity `L_s [v; ω]` in px/s.
pub fn pixel_velocity<T: Real>(
    c: &Vector2<T>,
    z: T,
    cam: &CameraModel<T>,
    v: &Vector3<T>,
    w: &Vector3<T>,
) -> Result<Vector2<T>, LtkfError> {
    let twist = Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z);
    Ok(interaction_matrix(c, z, cam)? * twist)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LtkfConfig {
    /// Process noise added per prediction step (px²).
    pub process_var_px2: f64,
    /// Centroid measurement variance (px²).
    pub meas_var_px2: f64,
    /// Initial variance of a spawned track (px²).
    pub spawn_var_px2: f64,
    /// Squared Mahalanobis gate.
    pub gate: f64,
    /// Consecutive missed corrections before a track is dropped.
    pub max_misses: usize,
    /// Tracks predicted further than this outside the sensor are dropped (px).
    pub border_margin_px: f64,
}

impl Default for LtkfConfig {
    fn default() -> Self {
        Self {
            process_var_px2: 0.25,
            meas_var_px2: 1.0,
            spawn_var_px2: 4.0,
            gate: GATE_CHI2_2DOF,
            max_misses: 3,
            border_margin_px: 10.0,
        }
    }
}

impl LtkfConfig {
    pub fn validate(&self) -> Result<(), LtkfError> {
        let positive = [
            ("process_var_px2", self.process_var_px2),
            ("meas_var_px2", self.meas_var_px2),
            ("spawn_var_px2", self.spawn_var_px2),
            ("gate", self.gate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LtkfError::Config(format!("{name} must be positive and finite")));
            }
        }
        if self.max_misses == 0 {
            return Err(LtkfError::Config("max_misses must be at least 1".into()));
        }
        if !(self.border_margin_px >= 0.0) {
            return Err(LtkfError::Config("border_margin_px must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LtkfTrack<T: Real> {
    pub id: u32,
    pub state: Vector2<T>,
    pub cov: Matrix2<T>,
    pub last_update: Micros,
    pub misses: usize,
}

impl<T: Real> LtkfTrack<T> {
    pub fn spawn(id: u32, z: Vector2<T>, t: Micros, spawn_var: T) -> Self {
        Self {
            id,
            state: z,
            cov: Matrix2::identity() * spawn_var,
            last_update: t,
            misses: 0,
        }
    }

    /// `c ← c + Δt ċ`, `P ← P + Q`.
    pub fn predict(&mut self, cdot: &Vector2<T>, dt: T, q: T) {
        self.state += cdot * dt;
        self.cov += Matrix2::identity() * q;
    }

    /// Update with `H = I`. A gated measurement counts as a miss.
    pub fn update(&mut self, z: &Vector2<T>, r: &Matrix2<T>, gate: Option<T>, t: Micros) -> Result<UpdateOutcome<T>, LtkfError> {
        if !is_spd(r) {
            return Err(KalmanError::InvalidMeasurementCovariance.into());
        }
        let out = joseph_update(&mut self.state, &mut self.cov, &Matrix2::identity(), r, z, gate)?;
        if out.accepted() {
            self.last_update = t;
            self.misses = 0;
        } else {
            self.misses += 1;
        }
        Ok(out)
    }
}

/// Counts from one correction pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorrectionSummary {
    pub updated: usize,
    pub spawned: usize,
    pub gated: usize,
    pub removed: usize,
}

/// Camera motion used to predict all tracks over one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraTwist<T: Real> {
    /// Linear velocity in the camera frame (m/s).
    pub linear: Vector3<T>,
    /// Angular velocity in the camera frame (rad/s).
    pub angular: Vector3<T>,
}

/// The set of live tracks, one per landmark id, ordered by id.
#[derive(Clone, Debug, PartialEq)]
pub struct Tracker<T: Real> {
    cfg: LtkfConfig,
    tracks: Vec<LtkfTrack<T>>,
}

impl<T: Real> Tracker<T> {
    pub fn new(cfg: LtkfConfig) -> Result<Self, LtkfError> {
        cfg.validate()?;
        Ok(Self { cfg, tracks: Vec::new() })
    }

    pub fn config(&self) -> &LtkfConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[LtkfTrack<T>] {
        &self.tracks
    }

    pub fn get(&self, id: u32) -> Option<&LtkfTrack<T>> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// Tracks corrected by the latest frame.
    pub fn active(&self) -> impl Iterator<Item = &LtkfTrack<T>> {
        self.tracks.iter().filter(|t| t.misses == 0)
    }

    /// Predicts every track over `dt`. `depth` returns the depth of a
    /// landmark id; tracks without a valid depth coast with zero pixel
    /// velocity. Tracks that leave the sensor by more than the border margin
    /// are dropped; their count is returned.
    pub fn predict(
        &mut self,
        dt: T,
        cam: &CameraModel<T>,
        twist: &CameraTwist<T>,
        depth: impl Fn(u32) -> Option<T>,
    ) -> usize {
        let q = T::lit(self.cfg.process_var_px2);
        for tr in &mut self.tracks {
            let cdot = depth(tr.id)
                .and_then(|z| pixel_velocity(&tr.state, z, cam, &twist.linear, &twist.angular).ok())
                .unwrap_or_else(Vector2::zeros);
            tr.predict(&cdot, dt, q);
        }
        let margin = T::lit(self.cfg.border_margin_px);
        let (w, h) = (T::from_count(cam.width as usize), T::from_count(cam.height as usize));
        let before = self.tracks.len();
        self.tracks.retain(|tr| {
            let c = tr.state;
            c.x >= -margin && c.y >= -margin && c.x <= w + margin && c.y <= h + margin
        });
        before - self.tracks.len()
    }

    /// Corrects tracks with the frame's centroids, spawns tracks for new ids
    /// and drops tracks that missed too many consecutive frames.
    pub fn correct(&mut self, frame: &NvbmFrame<T>) -> Result<CorrectionSummary, LtkfError> {
        let r = Matrix2::identity() * T::lit(self.cfg.meas_var_px2);
        let gate = Some(T::lit(self.cfg.gate));
        let mut summary = CorrectionSummary::default();
        for tr in &mut self.tracks {
            match frame.get(tr.id) {
                Some(m) => {
                    if tr.update(&m.center, &r, gate, frame.t)?.accepted() {
                        summary.updated += 1;
                    } else {
                        summary.gated += 1;
                    }
                }
                None => tr.misses += 1,
            }
        }
        let before = self.tracks.len();
        let max_misses = self.cfg.max_misses;
        self.tracks.retain(|t| t.misses < max_misses);
        summary.removed = before - self.tracks.len();
        let spawn_var = T::lit(self.cfg.spawn_var_px2);
        for m in &frame.measurements {
            if self.get(m.id).is_none() {
                self.tracks.push(LtkfTrack::spawn(m.id, m.center, frame.t, spawn_var));
                summary.spawned += 1;
            }
        }
        self.tracks.sort_by_key(|t| t.id);
        Ok(summary)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackSource {
    Predict,
    Update,
}

/// One row of the track log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackLogRow {
    pub t_us: Micros,
    pub id: u32,
    pub u: f64,
    pub v: f64,
    #[serde(rename = "Puu")]
    pub puu: f64,
    #[serde(rename = "Pvv")]
    pub pvv: f64,
    pub source: TrackSource,
}

impl TrackLogRow {
    pub fn from_track<T: Real>(t_us: Micros, track: &LtkfTrack<T>, source: TrackSource) -> Self {
        Self {
            t_us,
            id: track.id,
            u: track.state.x.as_f64(),
            v: track.state.y.as_f64(),
            puu: track.cov[(0, 0)].as_f64(),
            pvv: track.cov[(1, 1)].as_f64(),
            source,
        }
    }
}

/// Writes `t_us,id,u,v,Puu,Pvv,source`.
pub fn write_track_csv(path: &Path, rows: &[TrackLogRow]) -> Result<(), DataError> {
    write_csv_rows(path, rows)
}

pub fn read_track_csv(path: &Path) -> Result<Vec<TrackLogRow>, DataError> {
    crate::error::read_csv_rows(path)
}
