//! The estimation loop: identification and corrections at the window rate,
//! inertial predictions at the IMU rate.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use flickerloc::camera::{CameraModel, RelativePose};
use flickerloc::error::{read_csv_rows, write_csv_rows, DataError};
use flickerloc::events::{read_events, Event, Micros, SensorSize, TransitionDetector, TransitionWindow, DEFAULT_TAU_US};
use flickerloc::gmm::{identify_window, LandmarkRegistry, WindowIdentification};
use flickerloc::ltkf::{CameraTwist, TrackLogRow, TrackSource, Tracker};
use flickerloc::relloc::{
    accel_to_landmark, pnp_solve, yaw_extract, Correspondence, ExtrinsicCalib, Madgwick, PoseLogRow, Tdkf,
};
use flickerloc::sim::{read_imu_csv, read_pixel_csv, read_pose_csv, simulate, ImuSample, PixelTruth, PoseTruth, ScenarioConfig, Simulation};

use crate::config::RunConfig;
use crate::sync::synchronize;
use crate::timing::{Stage, StageTimer, TimingReport};
use crate::{module_seed, PipelineError};

/// Ground truth used for evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TruthData {
    pub poses: Vec<PoseTruth>,
    /// Landmark image positions grouped by timestamp; may be empty.
    pub pixels: Vec<(Micros, Vec<PixelTruth>)>,
}

/// Everything a run consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Supplies the camera model and the landmark registry.
    pub scenario: ScenarioConfig,
    pub events: Vec<Event>,
    /// Stamped on the IMU clock.
    pub imu: Vec<ImuSample>,
    pub truth: Option<TruthData>,
}

impl Dataset {
    pub fn from_simulation(scenario: ScenarioConfig, sim: Simulation) -> Self {
        let truth = TruthData {
            poses: sim.truth.poses(),
            pixels: sim.truth.samples.iter().map(|s| (s.t, s.landmarks.clone())).collect(),
        };
        Self { scenario, events: sim.events, imu: sim.imu, truth: Some(truth) }
    }

    /// Loads the files named by the run configuration. Without event or
    /// directory inputs the scenario is simulated in memory.
    pub fn load(cfg: &RunConfig) -> Result<Self, PipelineError> {
        let inputs = &cfg.inputs;
        let scenario_path = inputs
            .scenario_path()
            .ok_or_else(|| PipelineError::Config("inputs.scenario or inputs.dir is required".into()))?;
        let scenario = ScenarioConfig::load(&scenario_path)?;
        let Some(events_path) = inputs.events_path() else {
            let sim = simulate(&scenario).map_err(|e| PipelineError::Config(e.to_string()))?;
            return Ok(Self::from_simulation(scenario, sim));
        };
        let events = read_events(&events_path)?;
        let imu_path = inputs.imu_path().ok_or_else(|| PipelineError::Config("inputs.imu is required".into()))?;
        let imu = read_imu_csv(&imu_path)?;
        let truth = match inputs.groundtruth_path().filter(|p| p.exists()) {
            Some(p) => {
                let poses = read_pose_csv(&p)?;
                let pixels = match inputs.landmarks_truth_path().filter(|p| p.exists()) {
                    Some(lp) => read_pixel_csv(&lp)?,
                    None => Vec::new(),
                };
                Some(TruthData { poses, pixels })
            }
            None => None,
        };
        Ok(Self { scenario, events, imu, truth })
    }

    pub fn camera(&self) -> Result<CameraModel<f64>, PipelineError> {
        self.scenario.camera.model().map_err(PipelineError::Config)
    }

    pub fn registry(&self) -> LandmarkRegistry {
        self.scenario.registry()
    }
}

/// One identified landmark in one window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NvbmLogRow {
    pub t_us: Micros,
    pub id: u32,
    pub nominal_hz: f64,
    pub mean_hz: f64,
    pub u: f64,
    pub v: f64,
    pub pixels: usize,
    pub members: usize,
}

/// Summary of one identification window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowLogRow {
    pub t_us: Micros,
    pub transitions: usize,
    pub j_opt: usize,
    pub measurements: usize,
    pub rejected: usize,
    pub ambiguous: u8,
    /// Largest distance between an identified cluster mean and its nominal
    /// frequency (Hz); NaN without measurements.
    pub cluster_max_err_hz: f64,
    /// Largest distance between a single transition of an identified
    /// cluster and the cluster's nominal frequency (Hz); NaN without
    /// measurements.
    pub raw_max_err_hz: f64,
}

/// Logs and timing of one run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub poses: Vec<PoseLogRow>,
    pub tracks: Vec<TrackLogRow>,
    pub nvbm: Vec<NvbmLogRow>,
    pub windows: Vec<WindowLogRow>,
    pub timing: TimingReport,
    /// Prediction steps executed between consecutive windows.
    pub predictions_per_window: Vec<u32>,
}

pub const POSE_LOG: &str = "pose_log.csv";
pub const TRACK_LOG: &str = "track_log.csv";
pub const NVBM_LOG: &str = "nvbm_log.csv";
pub const WINDOW_LOG: &str = "windows.csv";

impl RunOutput {
    pub fn write(&self, dir: &Path) -> Result<(), DataError> {
        std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
        write_csv_rows(&dir.join(POSE_LOG), &self.poses)?;
        write_csv_rows(&dir.join(TRACK_LOG), &self.tracks)?;
        write_csv_rows(&dir.join(NVBM_LOG), &self.nvbm)?;
        write_csv_rows(&dir.join(WINDOW_LOG), &self.windows)
    }
}

/// Logs read back from a run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLogs {
    pub poses: Vec<PoseLogRow>,
    pub tracks: Vec<TrackLogRow>,
    pub windows: Vec<WindowLogRow>,
}

impl RunLogs {
    pub fn read(dir: &Path) -> Result<Self, DataError> {
        Ok(Self {
            poses: read_csv_rows(&dir.join(POSE_LOG))?,
            tracks: read_csv_rows(&dir.join(TRACK_LOG))?,
            windows: read_csv_rows(&dir.join(WINDOW_LOG))?,
        })
    }
}

impl From<&RunOutput> for RunLogs {
    fn from(o: &RunOutput) -> Self {
        Self { poses: o.poses.clone(), tracks: o.tracks.clone(), windows: o.windows.clone() }
    }
}

fn window_row(id: &WindowIdentification<f64>, window: &TransitionWindow, registry: &LandmarkRegistry) -> WindowLogRow {
    let mut cluster_err = f64::NAN;
    let mut raw_err = f64::NAN;
    let transitions = window.transitions();
    for m in &id.frame.measurements {
        cluster_err = (m.mean_hz - m.nominal_hz).abs().max(cluster_err.max(0.0));
        let members = id
            .clusters
            .as_ref()
            .and_then(|cs| cs.clusters.iter().find(|c| c.mean == m.mean_hz))
            .map(|c| c.members.as_slice())
            .unwrap_or(&[]);
        for &i in members {
            raw_err = (transitions[i].f - m.nominal_hz).abs().max(raw_err.max(0.0));
        }
        debug_assert!(registry.get(m.id).is_some());
    }
    WindowLogRow {
        t_us: window.t_now(),
        transitions: window.len(),
        j_opt: id.j_opt(),
        measurements: id.frame.measurements.len(),
        rejected: id.rejected_clusters,
        ambiguous: u8::from(id.frame.ambiguous),
        cluster_max_err_hz: cluster_err,
        raw_max_err_hz: raw_err,
    }
}

struct Estimator {
    madgwick: Madgwick<f64>,
    tdkf: Tdkf<f64>,
}

impl Estimator {
    fn camera_pose(&self, calib: &ExtrinsicCalib<f64>) -> RelativePose<f64> {
        RelativePose::new(calib.camera_attitude(&self.madgwick.attitude()), self.tdkf.state.translation())
    }
}

/// Runs the estimator over the dataset.
pub fn run_pipeline(cfg: &RunConfig, data: &Dataset) -> Result<RunOutput, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let cam = data.camera()?;
    let registry = data.registry();
    let ident_cfg = cfg.ident_effective();
    let tdkf_cfg = cfg.tdkf_effective();
    let calib = ExtrinsicCalib::<f64>::default();
    let ratio = cfg.rates.ratio().map_err(PipelineError::Config)?;
    let step_us = cfg.rates.step_us();
    let window_us = step_us * ratio;
    let dt = step_us as f64 / 1e6;
    let ident_seed = module_seed(cfg.seed, "ident");

    let event_times: Vec<Micros> = data.events.iter().map(|e| e.t).collect();
    let streams = synchronize(&event_times, &data.imu, cfg.clock_offset_ms)?;

    let mut detector = TransitionDetector::new(SensorSize::new(cam.width, cam.height), DEFAULT_TAU_US);
    let mut window = TransitionWindow::new(DEFAULT_TAU_US);
    let mut tracker = Tracker::<f64>::new(cfg.ltkf)?;
    let mut timer = StageTimer::default();
    let mut est: Option<Estimator> = None;
    let mut out = RunOutput {
        poses: Vec::new(),
        tracks: Vec::new(),
        nvbm: Vec::new(),
        windows: Vec::new(),
        timing: TimingReport { stages: Vec::new(), total_ms: 0.0 },
        predictions_per_window: Vec::new(),
    };
    let mut next_event = 0;
    let mut predictions = 0u32;
    let mut new_transitions = Vec::new();

    let mut t = streams.start.div_ceil(step_us) * step_us;
    while t <= streams.end {
        let is_window = t % window_us == 0;
        let imu = streams.imu_at(t).copied();

        // Prediction over the step ending at t.
        if let (Some(e), Some(s)) = (est.as_mut(), imu) {
            timer.time(Stage::Madgwick, || e.madgwick.step(&s.gyro, &s.accel, None, dt));
            timer.time(Stage::Tdkf, || {
                let r_lc = calib.camera_attitude(&e.madgwick.attitude());
                let a = accel_to_landmark(&s.accel, &r_lc, &calib, cfg.gravity);
                e.tdkf.predict(&a, dt);
            });
        }
        let pose = est.as_ref().map(|e| e.camera_pose(&calib));
        let twist = match (&pose, &est, imu) {
            (Some(p), Some(e), Some(s)) => CameraTwist {
                linear: p.rotation.inverse_transform_vector(&e.tdkf.state.velocity()),
                angular: calib.camera_rate(&s.gyro),
            },
            _ => CameraTwist { linear: Vector3::zeros(), angular: Vector3::zeros() },
        };
        timer.time(Stage::Ltkf, || {
            tracker.predict(dt, &cam, &twist, |id| {
                let p = pose.as_ref()?;
                let z = p.to_camera(&registry.get(id)?.position).z;
                (z > 0.0).then_some(z)
            })
        });
        predictions += 1;
        if !is_window {
            out.tracks.extend(tracker.tracks().iter().map(|tr| TrackLogRow::from_track(t, tr, TrackSource::Predict)));
        }

        let mut pnp_valid = false;
        if is_window {
            timer.time(Stage::Transitions, || {
                new_transitions.clear();
                while next_event < data.events.len() && data.events[next_event].t <= t {
                    if let Some(d) = detector.push(&data.events[next_event]) {
                        new_transitions.push(d);
                    }
                    next_event += 1;
                }
                window.advance(new_transitions.drain(..), t);
            });
            let id = timer.time(Stage::Clustering, || identify_window::<f64>(&window, &registry, &ident_cfg, ident_seed.wrapping_add(t)))?;
            out.windows.push(window_row(&id, &window, &registry));
            out.nvbm.extend(id.frame.measurements.iter().map(|m| NvbmLogRow {
                t_us: t,
                id: m.id,
                nominal_hz: m.nominal_hz,
                mean_hz: m.mean_hz,
                u: m.center.x,
                v: m.center.y,
                pixels: m.pixel_count,
                members: m.member_count,
            }));
            timer.time(Stage::Ltkf, || tracker.correct(&id.frame))?;
            out.tracks.extend(tracker.tracks().iter().map(|tr| {
                let source = if tr.misses == 0 { TrackSource::Update } else { TrackSource::Predict };
                TrackLogRow::from_track(t, tr, source)
            }));
            out.predictions_per_window.push(predictions);
            predictions = 0;

            let data_pts: Vec<Correspondence<f64>> = tracker
                .active()
                .filter_map(|tr| {
                    let l = registry.get(tr.id)?;
                    Some(Correspondence { point: Point3::from(l.position.coords), pixel: tr.state })
                })
                .collect();
            if data_pts.len() >= 4 {
                let fix = timer.time(Stage::Pnp, || {
                    let warm = est.as_ref().map(|e| e.camera_pose(&calib));
                    let first = pnp_solve(&data_pts, &cam, warm.as_ref(), &cfg.pnp).ok().filter(|p| p.valid);
                    match (first, warm) {
                        (Some(p), _) => Some(p),
                        (None, Some(_)) => pnp_solve(&data_pts, &cam, None, &cfg.pnp).ok().filter(|p| p.valid),
                        (None, None) => None,
                    }
                });
                if let Some(fix) = fix {
                    pnp_valid = true;
                    match est.as_mut() {
                        None => {
                            let q = calib.body_attitude(&fix.pose.rotation);
                            let mut madgwick = Madgwick::new(cfg.madgwick, q);
                            if let Some(y) = yaw_extract(&fix.pose.rotation, &calib, cfg.madgwick.gimbal_limit_deg) {
                                madgwick.set_yaw_reference(y, t);
                            }
                            est = Some(Estimator { madgwick, tdkf: Tdkf::new(tdkf_cfg, fix.pose.translation) });
                        }
                        Some(e) => {
                            timer.time(Stage::Tdkf, || e.tdkf.update(&fix.pose.translation))?;
                            if let Some(y) = yaw_extract(&fix.pose.rotation, &calib, cfg.madgwick.gimbal_limit_deg) {
                                e.madgwick.set_yaw_reference(y, t);
                            }
                        }
                    }
                }
            }
        }

        if let Some(e) = &est {
            let p = e.camera_pose(&calib);
            let (v, b) = (e.tdkf.state.velocity(), e.tdkf.state.bias());
            let q = p.rotation.quaternion();
            out.poses.push(PoseLogRow {
                t_us: t,
                tx: p.translation.x,
                ty: p.translation.y,
                tz: p.translation.z,
                vx: v.x,
                vy: v.y,
                vz: v.z,
                bx: b.x,
                by: b.y,
                bz: b.z,
                qw: q.w,
                qx: q.i,
                qy: q.j,
                qz: q.k,
                pnp_valid: u8::from(pnp_valid),
            });
        }
        t += step_us;
    }
    out.timing = timer.report();
    Ok(out)
}
