//! Synthetic event camera, IMU and ground truth for a flickering landmark
//! constellation.

mod imu;
mod render;
mod scenario;
mod trajectory;
mod truth;

use std::path::Path;

use thiserror::Error;

pub use imu::{read_imu_csv, synthesize_imu, write_imu_csv, ImuSample};
pub use render::{camera_attitude, camera_pose, ground_truth, optical_axis, synthesize_events, truth_at};
pub use scenario::{default_constellation, CameraConfig, LandmarkSpec, NoiseSpec, RateSpec, ScenarioConfig};
pub use trajectory::{HoverSpec, SquareSpec, TrajectorySpec, TrajectoryState, Waypoint, WaypointSpec};
pub use truth::{
    interpolate_pose, nearest_by, read_pixel_csv, read_pose_csv, GroundTruthLog, PixelTruth, PoseTruth, TruthSample,
};

use crate::error::DataError;
use crate::events::{write_events_binary, write_events_csv, Event};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Complete output of one simulated run.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub events: Vec<Event>,
    pub imu: Vec<ImuSample>,
    pub truth: GroundTruthLog,
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<Simulation, SimError> {
    let (events, truth) = synthesize_events(cfg)?;
    Ok(Simulation { events, imu: synthesize_imu(cfg), truth })
}

impl Simulation {
    /// Writes `events.csv` (or `events.bin`), `imu.csv`, `groundtruth.csv` and
    /// `landmarks_truth.csv` into `dir`.
    pub fn write(&self, dir: &Path, binary_events: bool) -> Result<(), DataError> {
        std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
        if binary_events {
            write_events_binary(&dir.join("events.bin"), &self.events)?;
        } else {
            write_events_csv(&dir.join("events.csv"), &self.events)?;
        }
        write_imu_csv(&dir.join("imu.csv"), &self.imu)?;
        self.truth.write_pose_csv(&dir.join("groundtruth.csv"))?;
        self.truth.write_pixel_csv(&dir.join("landmarks_truth.csv"))
    }
}
