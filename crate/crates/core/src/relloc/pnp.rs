//! Perspective-n-point pose from landmark correspondences.

use nalgebra::{DMatrix, Matrix2x3, Matrix3, Matrix3x4, Matrix6, Point3, Rotation3, SMatrix, UnitQuaternion, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::RellocError;
use crate::camera::{CameraModel, RelativePose};
use crate::scalar::Real;

/// A landmark position in the landmark frame and its observed pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence<T: Real> {
    pub point: Point3<T>,
    pub pixel: Vector2<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PnpConfig {
    pub max_iter: usize,
    /// Step halvings tried before an iteration is declared stalled.
    pub max_backtracks: usize,
    /// Iteration stops once the twist step is shorter than this.
    pub step_tol: f64,
    /// Poses with a larger reprojection RMS (px) are flagged invalid.
    pub max_rms_px: f64,
}

impl Default for PnpConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            max_backtracks: 30,
            step_tol: 1e-12,
            max_rms_px: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseEstimate<T: Real> {
    /// Camera pose in the landmark frame.
    pub pose: RelativePose<T>,
    pub rms_px: T,
    pub iterations: usize,
    /// All depths positive and reprojection RMS within bounds.
    pub valid: bool,
    /// Sum of squared reprojection residuals before each accepted step, then
    /// the final value.
    pub cost_history: Vec<T>,
}

/// World-to-camera transform `X_c = R X + t` being refined.
#[derive(Clone, Copy)]
struct Extrinsics<T: Real> {
    r: Rotation3<T>,
    t: Vector3<T>,
}

impl<T: Real> Extrinsics<T> {
    fn from_pose(p: &RelativePose<T>) -> Self {
        let (r, t) = p.extrinsics();
        Self { r, t }
    }

    fn pose(&self) -> RelativePose<T> {
        RelativePose::from_extrinsics(&self.r, &self.t)
    }

    /// Left perturbation `exp(φ) X_c + ρ`.
    fn perturbed(&self, d: &Vector6<T>) -> Self {
        let rho = Vector3::new(d[0], d[1], d[2]);
        let phi = Vector3::new(d[3], d[4], d[5]);
        let dr = Rotation3::new(phi);
        Self { r: dr * self.r, t: dr * self.t + rho }
    }
}

fn cost<T: Real>(e: &Extrinsics<T>, data: &[Correspondence<T>], cam: &CameraModel<T>) -> Option<T> {
    let mut c = T::zero();
    for d in data {
        let pc = e.r * d.point.coords + e.t;
        let (px, _) = cam.project_camera_point(&pc).ok()?;
        c += (d.pixel - px).norm_squared();
    }
    Some(c)
}

/// Gauss-Newton normal equations at `e`; `None` if a point is behind the camera.
fn normal_equations<T: Real>(
    e: &Extrinsics<T>,
    data: &[Correspondence<T>],
    cam: &CameraModel<T>,
) -> Option<(Matrix6<T>, Vector6<T>)> {
    let mut jtj = Matrix6::zeros();
    let mut jtr = Vector6::zeros();
    for d in data {
        let pc = e.r * d.point.coords + e.t;
        let (px, z) = cam.project_camera_point(&pc).ok()?;
        let r = d.pixel - px;
        let iz = T::one() / z;
        #[rustfmt::skip]
        let dproj = Matrix2x3::new(
            cam.fu * iz, cam.skew * iz, -(cam.fu * pc.x + cam.skew * pc.y) * iz * iz,
            T::zero(), cam.fv * iz, -cam.fv * pc.y * iz * iz,
        );
        let mut dx = SMatrix::<T, 3, 6>::zeros();
        dx.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        dx.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-pc.cross_matrix()));
        // Residual Jacobian is the negated projection Jacobian.
        let j = -(dproj * dx);
        jtj += j.transpose() * j;
        jtr += j.transpose() * r;
    }
    Some((jtj, jtr))
}

/// Runs Gauss-Newton with backtracking from `init`. Every accepted step
/// strictly lowers the cost; iteration ends when no halving of the step
/// lowers it further or the step becomes negligible.
fn refine<T: Real>(
    init: Extrinsics<T>,
    data: &[Correspondence<T>],
    cam: &CameraModel<T>,
    cfg: &PnpConfig,
) -> Result<(Extrinsics<T>, T, usize, Vec<T>), RellocError> {
    let mut e = init;
    let mut c = cost(&e, data, cam).ok_or(RellocError::NoConvergence)?;
    let mut history = vec![c];
    let step_tol = T::lit(cfg.step_tol);
    for it in 0..cfg.max_iter {
        let (jtj, jtr) = normal_equations(&e, data, cam).ok_or(RellocError::NoConvergence)?;
        let Some(step) = jtj.cholesky().map(|ch| -ch.solve(&jtr)) else {
            return Err(RellocError::Degenerate);
        };
        let mut alpha = T::one();
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let cand = e.perturbed(&(step * alpha));
            if let Some(cc) = cost(&cand, data, cam) {
                if cc < c {
                    accepted = Some((cand, cc));
                    break;
                }
            }
            alpha *= T::lit(0.5);
        }
        let Some((cand, cc)) = accepted else {
            return Ok((e, c, it, history));
        };
        e = cand;
        c = cc;
        history.push(c);
        if step.norm() * alpha < step_tol {
            return Ok((e, c, it + 1, history));
        }
    }
    Err(RellocError::NoConvergence)
}

/// Direct linear estimate of the extrinsics from at least six points in
/// general position, using normalised image coordinates and a centred,
/// scaled point cloud for conditioning.
fn dlt<T: Real>(data: &[Correspondence<T>], cam: &CameraModel<T>) -> Option<Extrinsics<T>> {
    let n = data.len();
    if n < 6 {
        return None;
    }
    let centroid = data.iter().fold(Vector3::zeros(), |a, d| a + d.point.coords) / T::from_count(n);
    let spread = data.iter().fold(T::zero(), |a, d| a + (d.point.coords - centroid).norm()) / T::from_count(n);
    if !(spread > T::zero()) {
        return None;
    }
    let s = T::one() / spread;
    let mut a = DMatrix::<T>::zeros(2 * n, 12);
    for (i, d) in data.iter().enumerate() {
        let x = (d.point.coords - centroid) * s;
        let m = cam.normalize(&d.pixel);
        let xh = [x.x, x.y, x.z, T::one()];
        for k in 0..4 {
            a[(2 * i, k)] = xh[k];
            a[(2 * i, 8 + k)] = -m.x * xh[k];
            a[(2 * i + 1, 4 + k)] = xh[k];
            a[(2 * i + 1, 8 + k)] = -m.y * xh[k];
        }
    }
    let ata = a.transpose() * &a;
    let eig = ata.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())?;
    let v = eig.eigenvectors.column(imin);
    let mut p = Matrix3x4::from_fn(|r, c| v[4 * r + c]);
    // Positive depth for the majority of points fixes the overall sign.
    let positive = data
        .iter()
        .filter(|d| {
            let x = (d.point.coords - centroid) * s;
            p.fixed_view::<1, 3>(2, 0).dot(&x.transpose()) + p[(2, 3)] > T::zero()
        })
        .count();
    if 2 * positive < n {
        p = -p;
    }
    let m: Matrix3<T> = p.fixed_view::<3, 3>(0, 0).into();
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let scale = svd.singular_values.mean();
    if !(scale > T::zero()) {
        return None;
    }
    let r = u * vt;
    if r.determinant() < T::zero() {
        return None;
    }
    // Undo the conditioning: X_c = R (s (X - centroid)) / scale' + b / scale.
    let b = p.column(3) / scale;
    let t = b * spread - r * centroid;
    Some(Extrinsics { r: Rotation3::from_matrix_unchecked(r), t })
}

/// Starts that place the camera on each principal axis of the landmark
/// frame, looking at the centroid, rolled to best match the observed
/// pixel pattern. Used when the direct estimate is unavailable.
fn axis_starts<T: Real>(data: &[Correspondence<T>], cam: &CameraModel<T>) -> Vec<Extrinsics<T>> {
    let n = T::from_count(data.len());
    let centroid = data.iter().fold(Vector3::zeros(), |a, d| a + d.point.coords) / n;
    let pix_c = data.iter().fold(Vector2::zeros(), |a, d| a + d.pixel) / n;
    let spread3 = data.iter().fold(T::zero(), |a, d| a + (d.point.coords - centroid).norm()) / n;
    let spread2 = data.iter().fold(T::zero(), |a, d| a + (d.pixel - pix_c).norm()) / n;
    let dist = if spread2 > T::zero() { cam.fu * spread3 / spread2 } else { T::lit(5.0) };
    let mut out = Vec::new();
    for axis in 0..3 {
        for sign in [T::one(), -T::one()] {
            let mut k = Vector3::zeros();
            k[axis] = sign;
            let up = if axis == 2 { Vector3::y() } else { Vector3::z() };
            // Camera looks along k from centroid - dist k.
            let Some(rot_lc) = look_rotation(&k, &up) else { continue };
            let r_cl = rot_lc.transpose();
            let cam_pos = centroid - k * dist;
            let base = Extrinsics { r: r_cl, t: -(r_cl * cam_pos) };
            // Roll about the optical axis that aligns predicted and observed pixels.
            let (mut dot, mut cross) = (T::zero(), T::zero());
            for d in data {
                let pc = base.r * d.point.coords + base.t;
                let Ok((px, _)) = cam.project_camera_point(&pc) else { continue };
                let a = px - pix_c;
                let b = d.pixel - pix_c;
                dot += a.dot(&b);
                cross += a.x * b.y - a.y * b.x;
            }
            let roll = cross.atan2(dot);
            let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
            out.push(Extrinsics { r: rz * base.r, t: rz * base.t });
        }
    }
    out
}

/// `R_LC` whose camera z axis is `forward` and camera y axis points away from `up`.
fn look_rotation<T: Real>(forward: &Vector3<T>, up: &Vector3<T>) -> Option<Rotation3<T>> {
    let z = forward.normalize();
    let x = z.cross(up).try_normalize(T::default_epsilon())?;
    let y = z.cross(&x);
    Some(Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])))
}

fn finish<T: Real>(
    e: Extrinsics<T>,
    c: T,
    iterations: usize,
    history: Vec<T>,
    data: &[Correspondence<T>],
    cfg: &PnpConfig,
) -> PoseEstimate<T> {
    let rms = (c / T::from_count(data.len())).sqrt();
    let depths_ok = data.iter().all(|d| (e.r * d.point.coords + e.t).z > T::zero());
    PoseEstimate {
        pose: e.pose(),
        rms_px: rms,
        iterations,
        valid: depths_ok && rms <= T::lit(cfg.max_rms_px),
        cost_history: history,
    }
}

/// Minimises the summed squared reprojection error over the camera pose by
/// Gauss-Newton on a twist parameterisation. Starts from `init` when given,
/// otherwise from a direct linear estimate, otherwise from axis-aligned
/// look-at poses, keeping the lowest-cost result.
pub fn pnp_solve<T: Real>(
    data: &[Correspondence<T>],
    cam: &CameraModel<T>,
    init: Option<&RelativePose<T>>,
    cfg: &PnpConfig,
) -> Result<PoseEstimate<T>, RellocError> {
    if data.len() < 4 {
        return Err(RellocError::InsufficientPoints(data.len()));
    }
    if let Some(p) = init {
        let (e, c, it, h) = refine(Extrinsics::from_pose(p), data, cam, cfg)?;
        return Ok(finish(e, c, it, h, data, cfg));
    }
    let mut best: Option<(Extrinsics<T>, T, usize, Vec<T>)> = None;
    let mut last_err = RellocError::Degenerate;
    let mut run = |starts: Vec<Extrinsics<T>>, best: &mut Option<(Extrinsics<T>, T, usize, Vec<T>)>| {
        for s in starts {
            match refine(s, data, cam, cfg) {
                Ok(r) => {
                    if best.as_ref().is_none_or(|b| r.1 < b.1) {
                        *best = Some(r);
                    }
                }
                Err(e) => last_err = e,
            }
        }
    };
    run(dlt(data, cam).into_iter().collect(), &mut best);
    let good = |b: &Option<(Extrinsics<T>, T, usize, Vec<T>)>| {
        b.as_ref().is_some_and(|b| finish(b.0, b.1, b.2, Vec::new(), data, cfg).valid)
    };
    if !good(&best) {
        run(axis_starts(data, cam), &mut best);
    }
    let (e, c, it, h) = best.ok_or(last_err)?;
    Ok(finish(e, c, it, h, data, cfg))
}

/// Rotation angle between two attitudes (rad).
pub fn rotation_error<T: Real>(a: &UnitQuaternion<T>, b: &UnitQuaternion<T>) -> T {
    a.angle_to(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::project;
    use crate::events::SensorSize;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraModel<f64> {
        CameraModel::new(600.0, 600.0, 320.0, 240.0, SensorSize::default()).unwrap()
    }

    fn cloud() -> Vec<Point3<f64>> {
        vec![
            Point3::new(-0.5, -0.4, 0.1),
            Point3::new(0.6, -0.3, -0.2),
            Point3::new(0.1, 0.5, 0.3),
            Point3::new(-0.4, 0.4, -0.3),
            Point3::new(0.3, 0.1, 0.5),
            Point3::new(0.0, -0.1, -0.6),
            Point3::new(-0.2, 0.2, 0.0),
        ]
    }

    fn observe(pose: &RelativePose<f64>, pts: &[Point3<f64>]) -> Vec<Correspondence<f64>> {
        pts.iter()
            .map(|p| Correspondence { point: *p, pixel: project(&cam(), pose, p).unwrap().pixel })
            .collect()
    }

    #[test]
    fn exact_data_identity_rotation() {
        // Camera 5 m behind the origin along -z looks at it with identity attitude.
        let pose = RelativePose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, -5.0));
        let est = pnp_solve(&observe(&pose, &cloud()), &cam(), None, &PnpConfig::default()).unwrap();
        assert!(est.valid);
        assert!((est.pose.translation - pose.translation).norm() < 1e-6);
        assert!(rotation_error(&est.pose.rotation, &pose.rotation) < 1e-6);
    }

    #[test]
    fn random_poses_cold_and_warm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let q = UnitQuaternion::from_euler_angles(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-3.0..3.0),
            );
            let dist = rng.random_range(3.0..8.0);
            let t = -(q * Vector3::new(0.0, 0.0, dist));
            let pose = RelativePose::new(q, t);
            let obs = observe(&pose, &cloud());
            let cold = pnp_solve(&obs, &cam(), None, &PnpConfig::default()).unwrap();
            assert!((cold.pose.translation - t).norm() < 1e-6);
            assert!(rotation_error(&cold.pose.rotation, &q) < 1e-6);
            let guess = RelativePose::new(q * UnitQuaternion::from_euler_angles(0.02, -0.01, 0.03), t + Vector3::new(0.1, -0.1, 0.2));
            let warm = pnp_solve(&obs, &cam(), Some(&guess), &PnpConfig::default()).unwrap();
            assert!((warm.pose.translation - t).norm() < 1e-6);
            for w in warm.cost_history.windows(2) {
                assert!(w[1] < w[0]);
            }
        }
    }

    #[test]
    fn four_points_without_direct_estimate() {
        let pts = &cloud()[..4];
        let q = UnitQuaternion::from_euler_angles(0.1, -0.2, 0.3);
        let t = -(q * Vector3::new(0.0, 0.0, 4.0));
        let pose = RelativePose::new(q, t);
        let est = pnp_solve(&observe(&pose, pts), &cam(), None, &PnpConfig::default()).unwrap();
        assert!(est.valid);
        assert!(est.rms_px < 1e-6);
    }

    #[test]
    fn too_few_points() {
        let pose = RelativePose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, -5.0));
        let obs = observe(&pose, &cloud()[..3]);
        assert_eq!(pnp_solve(&obs, &cam(), None, &PnpConfig::default()).unwrap_err(), RellocError::InsufficientPoints(3));
    }

    #[test]
    fn rms_threshold_invalidates() {
        let pose = RelativePose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, -5.0));
        let mut obs = observe(&pose, &cloud());
        obs[0].pixel.x += 60.0;
        let est = pnp_solve(&obs, &cam(), Some(&pose), &PnpConfig::default()).unwrap();
        assert!(!est.valid);
        assert_relative_eq!(est.cost_history[0], 3600.0, epsilon = 1e-6);
    }
}
