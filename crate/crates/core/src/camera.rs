//! Pinhole camera model and the relative pose between camera and landmark frames.
//!
//! Frame conventions used throughout the crate:
//!
//! * `L` is the landmark frame with `l_z` pointing up (against gravity).
//! * `C` is the camera frame: `z` along the optical axis, `x` right, `y` down.
//! * A [`RelativePose`] stores the camera position in `L` and the rotation
//!   `R_LC` that maps camera-frame vectors into `L`. A landmark `X` projects
//!   through `X_c = R_LCᵀ (X - t)`.

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::SensorSize;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum CameraError {
    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
}

/// Pinhole intrinsics `K = [[f_u, skew, u0], [0, f_v, v0], [0, 0, 1]]` and resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct CameraModel<T> {
    pub fu: T,
    pub fv: T,
    #[serde(default)]
    pub skew: T,
    pub u0: T,
    pub v0: T,
    pub width: u16,
    pub height: u16,
}

impl<T: Real> CameraModel<T> {
    pub fn new(fu: T, fv: T, u0: T, v0: T, size: SensorSize) -> Result<Self, CameraError> {
        let cam = Self {
            fu,
            fv,
            skew: T::zero(),
            u0,
            v0,
            width: size.width,
            height: size.height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Square-pixel camera whose horizontal field of view is `fov_deg`,
    /// using `FOV = 2 atan(W / 2f)` and a centred principal point.
    pub fn from_fov(size: SensorSize, fov_deg: T) -> Result<Self, CameraError> {
        if !(fov_deg > T::zero() && fov_deg < T::lit(180.0)) {
            return Err(CameraError::InvalidIntrinsics("field of view must be in (0, 180) degrees"));
        }
        let w = T::from_count(size.width as usize);
        let h = T::from_count(size.height as usize);
        let half = fov_deg.deg_to_rad() * T::lit(0.5);
        let f = w / (T::lit(2.0) * half.tan());
        Self::new(f, f, w * T::lit(0.5), h * T::lit(0.5), size)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let w = T::from_count(self.width as usize);
        let h = T::from_count(self.height as usize);
        if !(self.fu > T::zero() && self.fv > T::zero()) {
            return Err(CameraError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if !(self.u0 > T::zero() && self.u0 < w && self.v0 > T::zero() && self.v0 < h) {
            return Err(CameraError::InvalidIntrinsics("principal point must lie inside the sensor"));
        }
        Ok(())
    }

    pub fn size(&self) -> SensorSize {
        SensorSize::new(self.width, self.height)
    }

    /// Horizontal field of view in degrees.
    pub fn horizontal_fov_deg(&self) -> T {
        let w = T::from_count(self.width as usize);
        (T::lit(2.0) * (w / (T::lit(2.0) * self.fu)).atan()).rad_to_deg()
    }

    pub fn k_matrix(&self) -> Matrix3<T> {
        Matrix3::new(
            self.fu, self.skew, self.u0,
            T::zero(), self.fv, self.v0,
            T::zero(), T::zero(), T::one(),
        )
    }

    /// Projects a camera-frame point. Returns the pixel and the depth.
    pub fn project_camera_point(&self, p: &Vector3<T>) -> Result<(Vector2<T>, T), CameraError> {
        let z = p.z;
        if z <= T::zero() {
            return Err(CameraError::BehindCamera { depth: z.as_f64() });
        }
        let x = p.x / z;
        let y = p.y / z;
        Ok((
            Vector2::new(self.fu * x + self.skew * y + self.u0, self.fv * y + self.v0),
            z,
        ))
    }

    /// Normalised image coordinates of a pixel (inverse of `K`).
    pub fn normalize(&self, c: &Vector2<T>) -> Vector2<T> {
        let y = (c.y - self.v0) / self.fv;
        let x = (c.x - self.u0 - self.skew * y) / self.fu;
        Vector2::new(x, y)
    }

    /// Whether a pixel lies on the sensor (pixel `i` spans `[i - 0.5, i + 0.5)`).
    pub fn in_view(&self, c: &Vector2<T>) -> bool {
        let half = T::lit(0.5);
        c.x >= -half
            && c.y >= -half
            && c.x < T::from_count(self.width as usize) - half
            && c.y < T::from_count(self.height as usize) - half
    }

    pub fn cast<U: Real>(&self) -> CameraModel<U> {
        CameraModel {
            fu: U::lit(self.fu.as_f64()),
            fv: U::lit(self.fv.as_f64()),
            skew: U::lit(self.skew.as_f64()),
            u0: U::lit(self.u0.as_f64()),
            v0: U::lit(self.v0.as_f64()),
            width: self.width,
            height: self.height,
        }
    }
}

/// Camera pose relative to the landmark frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativePose<T: Real> {
    /// `R_LC`: camera frame to landmark frame.
    pub rotation: UnitQuaternion<T>,
    /// Camera position expressed in the landmark frame.
    pub translation: Vector3<T>,
}

impl<T: Real> RelativePose<T> {
    pub fn new(rotation: UnitQuaternion<T>, translation: Vector3<T>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::zeros())
    }

    /// Builds the pose from the `[R | t]` extrinsics that map landmark points
    /// into the camera frame (`X_c = R_cl X + t_cl`).
    pub fn from_extrinsics(r_cl: &Rotation3<T>, t_cl: &Vector3<T>) -> Self {
        let r_lc = r_cl.transpose();
        Self::new(UnitQuaternion::from_rotation_matrix(&r_lc), -(r_lc * t_cl))
    }

    /// `(R_cl, t_cl)` such that `X_c = R_cl X + t_cl`.
    pub fn extrinsics(&self) -> (Rotation3<T>, Vector3<T>) {
        let r_cl = self.rotation.inverse().to_rotation_matrix();
        let t_cl = -(r_cl * self.translation);
        (r_cl, t_cl)
    }

    pub fn to_camera(&self, x: &Point3<T>) -> Vector3<T> {
        self.rotation.inverse_transform_vector(&(x.coords - self.translation))
    }
}

/// Pixel location and depth of a projected landmark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection<T: Real> {
    pub pixel: Vector2<T>,
    pub depth: T,
    /// `false` when the pixel falls outside the sensor. Not an error.
    pub in_view: bool,
}

/// Perspective projection `s [c; 1] = K [R | t] [X; 1]` of a landmark-frame point.
pub fn project<T: Real>(
    camera: &CameraModel<T>,
    pose: &RelativePose<T>,
    x: &Point3<T>,
) -> Result<Projection<T>, CameraError> {
    let pc = pose.to_camera(x);
    let (pixel, depth) = camera.project_camera_point(&pc)?;
    Ok(Projection {
        pixel,
        depth,
        in_view: camera.in_view(&pixel),
    })
}
