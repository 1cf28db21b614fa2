//! Fixed rotations between the body, camera and landmark frames, and
//! roll-pitch-yaw conversions.
//!
//! The IMU body frame `B` is forward-left-up. The camera looks along body
//! forward, so camera `x` is body `-y`, camera `y` is body `-z` and camera `z`
//! is body `x`.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::scalar::Real;

/// `R_CB`: maps body-frame vectors into the camera frame.
pub fn camera_from_body<T: Real>() -> Rotation3<T> {
    let (o, z) = (T::one(), T::zero());
    Rotation3::from_matrix_unchecked(Matrix3::new(
        z, -o, z,
        z, z, -o,
        o, z, z,
    ))
}

/// Rotation `R_z(yaw) R_y(pitch) R_x(roll)`.
pub fn from_roll_pitch_yaw<T: Real>(roll: T, pitch: T, yaw: T) -> UnitQuaternion<T> {
    UnitQuaternion::from_euler_angles(roll, pitch, yaw)
}

/// Inverse of [`from_roll_pitch_yaw`], returning `(roll, pitch, yaw)`.
pub fn roll_pitch_yaw<T: Real>(q: &UnitQuaternion<T>) -> (T, T, T) {
    q.euler_angles()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::two_pi();
    let mut x = a % two_pi;
    if x > T::pi() {
        x -= two_pi;
    } else if x <= -T::pi() {
        x += two_pi;
    }
    x
}

/// Body angular velocity from roll-pitch-yaw angles and their rates.
pub fn body_rates_from_euler<T: Real>(angles: Vector3<T>, rates: Vector3<T>) -> Vector3<T> {
    let (roll, pitch) = (angles.x, angles.y);
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Vector3::new(
        rates.x - sp * rates.z,
        cr * rates.y + sr * cp * rates.z,
        -sr * rates.y + cr * cp * rates.z,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn camera_axes() {
        let r = camera_from_body::<f64>();
        assert_relative_eq!(r * Vector3::x(), Vector3::z());
        assert_relative_eq!(r * Vector3::y(), -Vector3::x());
        assert_relative_eq!(r * Vector3::z(), -Vector3::y());
        assert_relative_eq!(r.matrix().determinant(), 1.0);
    }

    #[test]
    fn euler_round_trip() {
        let q = from_roll_pitch_yaw(0.1, -0.3, 2.0);
        let (r, p, y) = roll_pitch_yaw(&q);
        assert_relative_eq!(r, 0.1, epsilon = 1e-12);
        assert_relative_eq!(p, -0.3, epsilon = 1e-12);
        assert_relative_eq!(y, 2.0, epsilon = 1e-12);
        let m = Rotation3::from_axis_angle(&Vector3::z_axis(), 2.0)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), -0.3)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), 0.1);
        assert_relative_eq!(q.to_rotation_matrix().matrix(), m.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn wrap() {
        assert_relative_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-0.5f64), -0.5);
        assert_relative_eq!(wrap_angle(7.0f64), 7.0 - std::f64::consts::TAU, epsilon = 1e-12);
    }

    #[test]
    fn body_rates_match_finite_difference() {
        let ang = |t: f64| Vector3::new(0.2 * t, 0.1 - 0.3 * t, 1.0 + 0.5 * t);
        let t = 0.7;
        let h = 1e-6;
        let q0 = from_roll_pitch_yaw(ang(t).x, ang(t).y, ang(t).z);
        let q1 = from_roll_pitch_yaw(ang(t + h).x, ang(t + h).y, ang(t + h).z);
        let fd = (q0.inverse() * q1).scaled_axis() / h;
        let w = body_rates_from_euler(ang(t), Vector3::new(0.2, -0.3, 0.5));
        assert_relative_eq!(w, fd, epsilon = 1e-5);
    }
}
