//! Relative pose of the camera in the landmark frame.
//!
//! PnP on identified landmarks gives a full pose per frame. Its yaw feeds a
//! gradient-descent attitude filter driven by the IMU, and its translation
//! corrects a position-velocity-bias Kalman filter driven by the IMU
//! accelerations rotated into the landmark frame.

mod layout;
mod orientation;
mod pnp;
mod tdkf;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layout::{layout_check, LayoutReport, AXIAL_SPREAD_PER_RANGE, NEAR_PLANAR_RATIO};
pub use orientation::{accel_to_landmark, yaw_extract, ExtrinsicCalib, Madgwick, MadgwickConfig, OrientationState};
pub use pnp::{pnp_solve, rotation_error, Correspondence, PnpConfig, PoseEstimate};
pub use tdkf::{Matrix9, PositionKinematics, Tdkf, TdkfConfig, TdkfState, Vector9, GATE_CHI2_3DOF};

use crate::error::{read_csv_rows, write_csv_rows, DataError};
use crate::events::Micros;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RellocError {
    #[error("{0} correspondences, at least 4 are needed")]
    InsufficientPoints(usize),
    #[error("degenerate point configuration")]
    Degenerate,
    #[error("pose refinement did not converge")]
    NoConvergence,
}

/// One row of the pose log. The attitude is `R_LC`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseLogRow {
    pub t_us: Micros,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub pnp_valid: u8,
}

/// Writes `t_us,tx,ty,tz,vx,vy,vz,bx,by,bz,qw,qx,qy,qz,pnp_valid`.
pub fn write_pose_log(path: &Path, rows: &[PoseLogRow]) -> Result<(), DataError> {
    write_csv_rows(path, rows)
}

pub fn read_pose_log(path: &Path) -> Result<Vec<PoseLogRow>, DataError> {
    read_csv_rows(path)
}
