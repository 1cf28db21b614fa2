//! Gradient-descent attitude filter with a vision yaw reference.
//!
//! Gyro rates are integrated and corrected towards the gravity direction
//! seen by the accelerometer. Yaw, unobservable from gravity, is pulled
//! towards the yaw of the latest PnP attitude.

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::events::Micros;
use crate::frames::{camera_from_body, wrap_angle};
use crate::scalar::Real;

/// Fixed camera mounting on the body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtrinsicCalib<T: Real> {
    /// `R_CB`: body frame to camera frame.
    pub r_cb: Rotation3<T>,
    /// Lever arm between IMU and camera (m). Not used by the estimators.
    pub offset: Vector3<T>,
}

impl<T: Real> Default for ExtrinsicCalib<T> {
    fn default() -> Self {
        Self { r_cb: camera_from_body(), offset: Vector3::zeros() }
    }
}

impl<T: Real> ExtrinsicCalib<T> {
    /// `R_LB = R_LC R_CB`.
    pub fn body_attitude(&self, r_lc: &UnitQuaternion<T>) -> UnitQuaternion<T> {
        r_lc * UnitQuaternion::from_rotation_matrix(&self.r_cb)
    }

    /// `R_LC = R_LB R_CBᵀ`.
    pub fn camera_attitude(&self, r_lb: &UnitQuaternion<T>) -> UnitQuaternion<T> {
        r_lb * UnitQuaternion::from_rotation_matrix(&self.r_cb.transpose())
    }

    /// Body rate expressed in the camera frame.
    pub fn camera_rate(&self, w_b: &Vector3<T>) -> Vector3<T> {
        self.r_cb * w_b
    }
}

/// Acceleration in the landmark frame, `R_LC R_CB a_B - g l_z`.
pub fn accel_to_landmark<T: Real>(
    a_b: &Vector3<T>,
    r_lc: &UnitQuaternion<T>,
    calib: &ExtrinsicCalib<T>,
    gravity: T,
) -> Vector3<T> {
    r_lc * (calib.r_cb * a_b) - Vector3::z() * gravity
}

/// Yaw of the body attitude implied by a camera attitude. `None` near
/// gimbal lock, where yaw is ill-defined.
pub fn yaw_extract<T: Real>(r_lc: &UnitQuaternion<T>, calib: &ExtrinsicCalib<T>, gimbal_limit_deg: T) -> Option<T> {
    let (_, pitch, yaw) = calib.body_attitude(r_lc).euler_angles();
    (pitch.abs() <= gimbal_limit_deg.deg_to_rad()).then_some(yaw)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MadgwickConfig {
    /// Gravity correction gain (rad/s).
    pub beta: f64,
    /// Yaw correction gain (1/s).
    pub yaw_gain: f64,
    /// Yaw references are skipped beyond this pitch (deg).
    pub gimbal_limit_deg: f64,
}

impl Default for MadgwickConfig {
    fn default() -> Self {
        Self { beta: 0.01, yaw_gain: 2.0, gimbal_limit_deg: 85.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientationState<T: Real> {
    /// `R_LB`: body frame to landmark frame.
    pub q: UnitQuaternion<T>,
    /// Latest yaw reference and its time.
    pub last_yaw: Option<(T, Micros)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Madgwick<T: Real> {
    pub cfg: MadgwickConfig,
    pub state: OrientationState<T>,
}

impl<T: Real> Madgwick<T> {
    pub fn new(cfg: MadgwickConfig, q: UnitQuaternion<T>) -> Self {
        Self { cfg, state: OrientationState { q, last_yaw: None } }
    }

    pub fn attitude(&self) -> UnitQuaternion<T> {
        self.state.q
    }

    /// Records a yaw reference used by subsequent steps.
    pub fn set_yaw_reference(&mut self, yaw: T, t: Micros) {
        self.state.last_yaw = Some((yaw, t));
    }

    /// One filter step. `yaw` overrides the stored reference for this step.
    pub fn step(&mut self, gyro: &Vector3<T>, accel: &Vector3<T>, yaw: Option<T>, dt: T) {
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let q = self.state.q.into_inner();
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        let omega = Quaternion::new(T::zero(), gyro.x, gyro.y, gyro.z);
        let mut qdot = (q * omega).coords * half;

        if let Some(a) = accel.try_normalize(T::default_epsilon()) {
            // Gravity direction predicted in the body frame minus the measured one.
            let f = Vector3::new(
                two * (x * z - w * y) - a.x,
                two * (w * x + y * z) - a.y,
                two * (half - x * x - y * y) - a.z,
            );
            // Jacobian rows with respect to the coordinates (i, j, k, w).
            let jt = nalgebra::Matrix4x3::new(
                two * z, two * w, -T::lit(4.0) * x,
                -two * w, two * z, -T::lit(4.0) * y,
                two * x, two * y, T::zero(),
                -two * y, two * x, T::zero(),
            );
            let grad: Vector4<T> = jt * f;
            if let Some(g) = grad.try_normalize(T::default_epsilon()) {
                qdot -= g * T::lit(self.cfg.beta);
            }
        }

        let yaw_ref = yaw.or(self.state.last_yaw.map(|(y, _)| y));
        if let Some(target) = yaw_ref {
            let (_, pitch, current) = self.state.q.euler_angles();
            if pitch.abs() <= T::lit(self.cfg.gimbal_limit_deg).deg_to_rad() {
                let e = wrap_angle(target - current);
                // Rotation about the landmark-frame vertical at rate gain * e.
                let spin = Quaternion::new(T::zero(), T::zero(), T::zero(), T::lit(self.cfg.yaw_gain) * e);
                qdot += (spin * q).coords * half;
            }
        }

        let next = Quaternion::from(q.coords + qdot * dt);
        self.state.q = UnitQuaternion::from_quaternion(next);
    }
}
