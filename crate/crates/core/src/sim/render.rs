//! Event synthesis for flickering disks seen by a moving pinhole camera.
//!
//! A pixel is lit while any landmark disk covering its centre is in the ON
//! half of its square wave. Each pixel keeps a reference level; when the lit
//! level departs from it by at least the contrast threshold one event fires
//! and the reference resets to the current level. Flicker edges happen at
//! analytic times. Disk boundaries move between evaluation instants (the
//! render grid merged with every flicker edge) and crossing times come from
//! linear interpolation of the pixel's signed distance to the disk rim.

use nalgebra::{Point3, UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::scenario::{LandmarkSpec, ScenarioConfig};
use super::truth::{GroundTruthLog, PixelTruth, TruthSample};
use super::SimError;
use crate::camera::{CameraModel, RelativePose};
use crate::events::{Event, Micros, Polarity, MICROS_PER_SEC};
use crate::frames::camera_from_body;

/// Landmarks closer than this along the optical axis are not drawn.
const MIN_DEPTH: f64 = 0.05;

/// Independent random streams derived from one seed.
pub(crate) const STREAM_JITTER: u64 = 1;
pub(crate) const STREAM_BACKGROUND: u64 = 2;
pub(crate) const STREAM_IMU: u64 = 3;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Camera pose at time `t`.
pub fn camera_pose(cfg: &ScenarioConfig, t: f64) -> RelativePose<f64> {
    let s = cfg.trajectory.state(t);
    RelativePose::new(camera_attitude(&s.attitude), s.position)
}

/// `R_LC = R_LB R_CBᵀ`.
pub fn camera_attitude(body: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    body * UnitQuaternion::from_rotation_matrix(&camera_from_body::<f64>().transpose())
}

#[derive(Clone, Copy, Debug)]
struct Disk {
    center: Vector2<f64>,
    radius: f64,
    valid: bool,
}

fn disk(cam: &CameraModel<f64>, pose: &RelativePose<f64>, l: &LandmarkSpec, t: f64) -> Disk {
    let pc = pose.to_camera(&l.position_at(t));
    if pc.z < MIN_DEPTH {
        return Disk { center: Vector2::zeros(), radius: 0.0, valid: false };
    }
    let (c, z) = cam.project_camera_point(&pc).expect("depth checked");
    Disk { center: c, radius: l.radius_px_at_1m / z, valid: true }
}

/// Whether the square wave is ON at `t`.
fn flicker_on(l: &LandmarkSpec, t: f64) -> bool {
    (t * l.frequency_hz + l.phase).rem_euclid(1.0) < l.duty
}

/// Edge instants `(t, landmark, on_after)` in `(0, end]`, time ordered.
fn flicker_edges(landmarks: &[LandmarkSpec], end: f64) -> Vec<(f64, usize, bool)> {
    let mut out = Vec::new();
    for (j, l) in landmarks.iter().enumerate() {
        let f = l.frequency_hz;
        let cycles = (end * f + l.phase).ceil() as i64 + 1;
        let first = l.phase.floor() as i64 - 1;
        for n in first..=cycles {
            for (offset, on) in [(0.0, true), (l.duty, false)] {
                let t = (n as f64 + offset - l.phase) / f;
                if t > 0.0 && t <= end {
                    out.push((t, j, on));
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    out
}

struct PixelState {
    /// Bit `j` set while landmark `j` covers the pixel centre.
    mask: Vec<u64>,
    lit: Vec<bool>,
    reference: Vec<bool>,
    last_fire: Vec<f64>,
    last_stamp: Vec<Option<Micros>>,
}

struct Emitter<'a> {
    width: usize,
    refractory_s: f64,
    fires: bool,
    jitter: Option<Normal<f64>>,
    rng: &'a mut ChaCha8Rng,
    out: Vec<Event>,
}

impl Emitter<'_> {
    fn update(&mut self, st: &mut PixelState, on_mask: u64, idx: usize, t: f64) {
        let lit = st.mask[idx] & on_mask != 0;
        st.lit[idx] = lit;
        if !self.fires || lit == st.reference[idx] || t - st.last_fire[idx] < self.refractory_s {
            return;
        }
        st.reference[idx] = lit;
        st.last_fire[idx] = t;
        let mut us = t * MICROS_PER_SEC;
        if let Some(n) = &self.jitter {
            us += n.sample(self.rng);
        }
        let mut stamp = us.round().max(0.0) as Micros;
        if let Some(prev) = st.last_stamp[idx] {
            stamp = stamp.max(prev + 1);
        }
        st.last_stamp[idx] = Some(stamp);
        let x = (idx % self.width) as u16;
        let y = (idx / self.width) as u16;
        let p = if lit { Polarity::On } else { Polarity::Off };
        self.out.push(Event::new(stamp, x, y, p));
    }
}

/// Pixel index range covering a disk with a one pixel margin, clipped to the sensor.
fn pixel_box(d: &Disk, w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
    if !d.valid {
        return None;
    }
    let x0 = (d.center.x - d.radius - 1.0).floor().max(0.0);
    let y0 = (d.center.y - d.radius - 1.0).floor().max(0.0);
    let x1 = (d.center.x + d.radius + 1.0).ceil().min(w as f64 - 1.0);
    let y1 = (d.center.y + d.radius + 1.0).ceil().min(h as f64 - 1.0);
    (x0 <= x1 && y0 <= y1).then(|| (x0 as usize, y0 as usize, x1 as usize, y1 as usize))
}

fn union_box(
    a: Option<(usize, usize, usize, usize)>,
    b: Option<(usize, usize, usize, usize)>,
) -> Option<(usize, usize, usize, usize)> {
    match (a, b) {
        (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3))),
        (a, b) => a.or(b),
    }
}

fn signed_distance(d: &Disk, x: usize, y: usize) -> f64 {
    if !d.valid {
        return f64::NEG_INFINITY;
    }
    d.radius - (Vector2::new(x as f64, y as f64) - d.center).norm()
}

/// Renders the landmark events of a scenario (no background noise),
/// unsorted.
fn render_landmarks(cfg: &ScenarioConfig, cam: &CameraModel<f64>, rng: &mut ChaCha8Rng) -> Vec<Event> {
    let (w, h) = (cam.width as usize, cam.height as usize);
    let n = cfg.landmarks.len();
    let noise = &cfg.noise;
    let end = cfg.duration_s;

    let mut instants: Vec<(f64, Option<(usize, bool)>)> = flicker_edges(&cfg.landmarks, end)
        .into_iter()
        .map(|(t, j, on)| (t, Some((j, on))))
        .collect();
    let steps = (end * cfg.rates.render_hz).ceil() as usize;
    instants.extend((1..=steps).map(|k| ((k as f64 / cfg.rates.render_hz).min(end), None)));
    instants.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut st = PixelState {
        mask: vec![0; w * h],
        lit: vec![false; w * h],
        reference: vec![false; w * h],
        last_fire: vec![f64::NEG_INFINITY; w * h],
        last_stamp: vec![None; w * h],
    };
    let mut em = Emitter {
        width: w,
        refractory_s: noise.refractory_us / MICROS_PER_SEC,
        fires: noise.flicker_amplitude >= noise.contrast_threshold,
        jitter: (noise.timestamp_jitter_us > 0.0).then(|| Normal::new(0.0, noise.timestamp_jitter_us).unwrap()),
        rng,
        out: Vec::new(),
    };

    let geometry = |t: f64| -> Vec<Disk> {
        let pose = camera_pose(cfg, t);
        cfg.landmarks.iter().map(|l| disk(cam, &pose, l, t)).collect()
    };

    let mut on_mask: u64 = 0;
    for (j, l) in cfg.landmarks.iter().enumerate() {
        if flicker_on(l, 0.0) {
            on_mask |= 1 << j;
        }
    }
    let mut prev = geometry(0.0);
    for (j, d) in prev.iter().enumerate() {
        if let Some((x0, y0, x1, y1)) = pixel_box(d, w, h) {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if signed_distance(d, x, y) >= 0.0 {
                        st.mask[y * w + x] |= 1 << j;
                    }
                }
            }
        }
    }
    for i in 0..w * h {
        st.lit[i] = st.mask[i] & on_mask != 0;
        st.reference[i] = st.lit[i];
    }

    let mut t_prev = 0.0;
    let mut crossings: Vec<(f64, usize, usize, bool)> = Vec::new();
    let mut k = 0;
    while k < instants.len() {
        let t = instants[k].0;
        let mut group_end = k;
        while group_end < instants.len() && instants[group_end].0 == t {
            group_end += 1;
        }
        if t > t_prev {
            let next = geometry(t);
            crossings.clear();
            for j in 0..n {
                let (a, b) = (&prev[j], &next[j]);
                let Some((x0, y0, x1, y1)) = union_box(pixel_box(a, w, h), pixel_box(b, w, h)) else {
                    continue;
                };
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let sa = signed_distance(a, x, y);
                        let sb = signed_distance(b, x, y);
                        let (ia, ib) = (sa >= 0.0, sb >= 0.0);
                        if ia == ib {
                            continue;
                        }
                        let frac = if sa.is_finite() && sb.is_finite() { sa / (sa - sb) } else { 0.5 };
                        crossings.push((t_prev + (t - t_prev) * frac, y * w + x, j, ib));
                    }
                }
            }
            crossings.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap().then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
            for &(tc, idx, j, inside) in &crossings {
                if inside {
                    st.mask[idx] |= 1 << j;
                } else {
                    st.mask[idx] &= !(1 << j);
                }
                em.update(&mut st, on_mask, idx, tc);
            }
            prev = next;
            t_prev = t;
        }
        let mut toggled: u64 = 0;
        for &(_, edge) in &instants[k..group_end] {
            if let Some((j, on)) = edge {
                if on {
                    on_mask |= 1 << j;
                } else {
                    on_mask &= !(1 << j);
                }
                toggled |= 1 << j;
            }
        }
        if toggled != 0 {
            for (j, d) in prev.iter().enumerate() {
                if toggled & (1 << j) == 0 {
                    continue;
                }
                if let Some((x0, y0, x1, y1)) = pixel_box(d, w, h) {
                    for y in y0..=y1 {
                        for x in x0..=x1 {
                            let idx = y * w + x;
                            if st.mask[idx] & (1 << j) != 0 {
                                em.update(&mut st, on_mask, idx, t);
                            }
                        }
                    }
                }
            }
        }
        k = group_end;
    }
    em.out
}

/// Seeded Poisson background events, uniform over pixels and time.
fn background(cfg: &ScenarioConfig, cam: &CameraModel<f64>, rng: &mut ChaCha8Rng) -> Vec<Event> {
    let rate = cfg.noise.background_rate_hz;
    let pixels = cam.width as usize * cam.height as usize;
    let mean = rate * pixels as f64 * cfg.duration_s;
    if mean <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(mean).unwrap().sample(rng) as usize;
    let end_us = (cfg.duration_s * MICROS_PER_SEC) as Micros;
    (0..count)
        .map(|_| {
            let t = rng.random_range(0..=end_us);
            let x = rng.random_range(0..cam.width);
            let y = rng.random_range(0..cam.height);
            let p = if rng.random_bool(0.5) { Polarity::On } else { Polarity::Off };
            Event::new(t, x, y, p)
        })
        .collect()
}

/// Synthesises the event stream (sorted by `(t, y, x)`) and the ground truth.
pub fn synthesize_events(cfg: &ScenarioConfig) -> Result<(Vec<Event>, GroundTruthLog), SimError> {
    cfg.validate().map_err(SimError::Config)?;
    let cam = cfg.camera.model().map_err(SimError::Config)?;
    let truth = ground_truth(cfg, &cam);
    if truth.samples.iter().all(|s| s.visible_count() == 0) {
        return Err(SimError::Config("no landmark is visible at any time".into()));
    }
    let mut events = render_landmarks(cfg, &cam, &mut rng_for(cfg.seed, STREAM_JITTER));
    events.extend(background(cfg, &cam, &mut rng_for(cfg.seed, STREAM_BACKGROUND)));
    events.sort_by_key(Event::canonical_key);
    Ok((events, truth))
}

/// Ground truth sampled on the truth grid, including the final instant.
pub fn ground_truth(cfg: &ScenarioConfig, cam: &CameraModel<f64>) -> GroundTruthLog {
    let dt_us = (MICROS_PER_SEC / cfg.rates.truth_hz).round().max(1.0) as Micros;
    let end_us = (cfg.duration_s * MICROS_PER_SEC).round() as Micros;
    let mut samples = Vec::new();
    let mut t_us = 0;
    while t_us <= end_us {
        samples.push(truth_at(cfg, cam, t_us));
        t_us += dt_us;
    }
    GroundTruthLog { samples }
}

pub fn truth_at(cfg: &ScenarioConfig, cam: &CameraModel<f64>, t_us: Micros) -> TruthSample {
    let t = t_us as f64 / MICROS_PER_SEC;
    let s = cfg.trajectory.state(t);
    let pose = RelativePose::new(camera_attitude(&s.attitude), s.position);
    let landmarks = cfg
        .landmarks
        .iter()
        .enumerate()
        .map(|(j, l)| landmark_truth(cam, &pose, j as u32, &l.position_at(t)))
        .collect();
    TruthSample {
        t: t_us,
        position: s.position,
        velocity: s.velocity,
        camera_attitude: pose.rotation,
        body_attitude: s.attitude,
        landmarks,
    }
}

fn landmark_truth(cam: &CameraModel<f64>, pose: &RelativePose<f64>, id: u32, x: &Point3<f64>) -> PixelTruth {
    match crate::camera::project(cam, pose, x) {
        Ok(p) => PixelTruth { id, pixel: p.pixel, depth: p.depth, visible: p.in_view && p.depth >= MIN_DEPTH },
        Err(_) => PixelTruth {
            id,
            pixel: Vector2::repeat(f64::NAN),
            depth: pose.to_camera(x).z,
            visible: false,
        },
    }
}

/// Direction of the optical axis in the landmark frame.
pub fn optical_axis(pose: &RelativePose<f64>) -> Vector3<f64> {
    pose.rotation * Vector3::z()
}
