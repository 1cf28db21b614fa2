//! Translation filter: position, velocity and accelerometer bias in the
//! landmark frame, predicted with rotated accelerations and corrected with
//! PnP translations.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::kalman::{is_spd, joseph_update, KalmanError, UpdateOutcome};
use crate::scalar::Real;

/// χ² quantile for three degrees of freedom at 0.997.
pub const GATE_CHI2_3DOF: f64 = 14.156;

pub type Matrix9<T> = SMatrix<T, 9, 9>;
pub type Vector9<T> = SVector<T, 9>;

/// Coefficient of `Δt²` on the acceleration in the position prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionKinematics {
    /// `½ Δt²`.
    #[default]
    Half,
    /// `Δt²`.
    Full,
}

impl PositionKinematics {
    pub fn coefficient<T: Real>(self) -> T {
        match self {
            Self::Half => T::lit(0.5),
            Self::Full => T::one(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TdkfConfig {
    /// White acceleration noise (m/s²/√Hz).
    pub accel_noise: f64,
    /// Bias random walk (m/s²·√s).
    pub bias_walk: f64,
    /// Variance of each PnP translation component (m²).
    pub meas_var_m2: f64,
    /// Squared Mahalanobis gate on PnP translations.
    pub gate: f64,
    pub init_pos_var_m2: f64,
    pub init_vel_var: f64,
    pub init_bias_var: f64,
    pub kinematics: PositionKinematics,
}

impl Default for TdkfConfig {
    fn default() -> Self {
        Self {
            accel_noise: 0.05,
            bias_walk: 0.001,
            meas_var_m2: 1e-4,
            gate: GATE_CHI2_3DOF,
            init_pos_var_m2: 1e-2,
            init_vel_var: 0.25,
            init_bias_var: 0.25,
            kinematics: PositionKinematics::Half,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdkfState<T: Real> {
    /// `[t; v; a_b]`.
    pub x: Vector9<T>,
    pub p: Matrix9<T>,
}

impl<T: Real> TdkfState<T> {
    pub fn translation(&self) -> Vector3<T> {
        self.x.fixed_rows::<3>(0).into()
    }

    pub fn velocity(&self) -> Vector3<T> {
        self.x.fixed_rows::<3>(3).into()
    }

    pub fn bias(&self) -> Vector3<T> {
        self.x.fixed_rows::<3>(6).into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tdkf<T: Real> {
    pub cfg: TdkfConfig,
    pub state: TdkfState<T>,
}

impl<T: Real> Tdkf<T> {
    /// Starts at `translation` with zero velocity and bias.
    pub fn new(cfg: TdkfConfig, translation: Vector3<T>) -> Self {
        let mut x = Vector9::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&translation);
        let mut p = Matrix9::zeros();
        for i in 0..3 {
            p[(i, i)] = T::lit(cfg.init_pos_var_m2);
            p[(i + 3, i + 3)] = T::lit(cfg.init_vel_var);
            p[(i + 6, i + 6)] = T::lit(cfg.init_bias_var);
        }
        Self { cfg, state: TdkfState { x, p } }
    }

    /// State transition with identity blocks; the bias enters subtractively.
    pub fn transition(&self, dt: T) -> Matrix9<T> {
        let c = self.cfg.kinematics.coefficient::<T>();
        let i3 = Matrix3::<T>::identity();
        let mut f = Matrix9::identity();
        f.fixed_view_mut::<3, 3>(0, 3).copy_from(&(i3 * dt));
        f.fixed_view_mut::<3, 3>(0, 6).copy_from(&(i3 * (-c * dt * dt)));
        f.fixed_view_mut::<3, 3>(3, 6).copy_from(&(i3 * (-dt)));
        f
    }

    /// Discretised white-acceleration and bias random-walk noise.
    pub fn process_noise(&self, dt: T) -> Matrix9<T> {
        let qa = T::lit(self.cfg.accel_noise * self.cfg.accel_noise);
        let qb = T::lit(self.cfg.bias_walk * self.cfg.bias_walk);
        let (dt2, dt3) = (dt * dt, dt * dt * dt);
        let mut q = Matrix9::zeros();
        for i in 0..3 {
            q[(i, i)] = qa * dt3 / T::lit(3.0);
            q[(i, i + 3)] = qa * dt2 / T::lit(2.0);
            q[(i + 3, i)] = qa * dt2 / T::lit(2.0);
            q[(i + 3, i + 3)] = qa * dt;
            q[(i + 6, i + 6)] = qb * dt;
        }
        q
    }

    /// `t ← t + Δt v + c Δt² (a - a_b)`, `v ← v + Δt (a - a_b)`.
    pub fn predict(&mut self, accel: &Vector3<T>, dt: T) {
        let c = self.cfg.kinematics.coefficient::<T>();
        let f = self.transition(dt);
        let mut u = Vector9::zeros();
        u.fixed_rows_mut::<3>(0).copy_from(&(accel * (c * dt * dt)));
        u.fixed_rows_mut::<3>(3).copy_from(&(accel * dt));
        let q = self.process_noise(dt);
        let s = &mut self.state;
        s.x = f * s.x + u;
        let p = f * s.p * f.transpose() + q;
        s.p = (p + p.transpose()) * T::lit(0.5);
    }

    /// Gated correction with a PnP translation and `R = meas_var I₃`.
    pub fn update(&mut self, z: &Vector3<T>) -> Result<UpdateOutcome<T>, KalmanError> {
        let r = Matrix3::identity() * T::lit(self.cfg.meas_var_m2);
        self.update_with(z, &r)
    }

    pub fn update_with(&mut self, z: &Vector3<T>, r: &Matrix3<T>) -> Result<UpdateOutcome<T>, KalmanError> {
        if !is_spd(r) {
            return Err(KalmanError::InvalidMeasurementCovariance);
        }
        let mut h = SMatrix::<T, 3, 9>::zeros();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        let s = &mut self.state;
        joseph_update(&mut s.x, &mut s.p, &h, r, z, Some(T::lit(self.cfg.gate)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unbiased_rest_is_a_fixed_point() {
        let mut f = Tdkf::new(TdkfConfig::default(), Vector3::new(1.0, 2.0, 3.0));
        f.state.x[6] = 0.3;
        for _ in 0..100 {
            f.predict(&Vector3::new(0.3, 0.0, 0.0), 0.005);
        }
        assert_relative_eq!(f.state.translation(), Vector3::new(1.0, 2.0, 3.0), epsilon = 1e-12);
        assert_relative_eq!(f.state.velocity(), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn constant_acceleration_kinematics() {
        for (mode, expected) in [(PositionKinematics::Half, 0.5), (PositionKinematics::Full, 0.5 + 0.5 * 0.005)] {
            let cfg = TdkfConfig { kinematics: mode, ..Default::default() };
            let mut f = Tdkf::new(cfg, Vector3::zeros());
            for _ in 0..200 {
                f.predict(&Vector3::new(1.0, 0.0, 0.0), 0.005);
            }
            assert_relative_eq!(f.state.velocity().x, 1.0, epsilon = 1e-9);
            // Half: Σ (k Δt² + ½ Δt²) = ½ T². Full adds ½ Δt² per step.
            assert_relative_eq!(f.state.translation().x, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn matching_measurement_shrinks_covariance() {
        let mut f = Tdkf::new(TdkfConfig::default(), Vector3::new(0.0, 0.0, 5.0));
        let p0 = f.state.p;
        assert!(f.update(&Vector3::new(0.0, 0.0, 5.0)).unwrap().accepted());
        assert_eq!(f.state.translation(), Vector3::new(0.0, 0.0, 5.0));
        assert!(f.state.p[(0, 0)] < p0[(0, 0)]);
    }

    #[test]
    fn flipped_pose_is_gated() {
        let mut f = Tdkf::<f64>::new(TdkfConfig::default(), Vector3::zeros());
        for _ in 0..50 {
            f.predict(&Vector3::zeros(), 0.005);
            f.update(&Vector3::zeros()).unwrap();
        }
        let before = f.state;
        let out = f.update(&Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(!out.accepted());
        assert_eq!(f.state, before);
    }

    #[test]
    fn bias_is_observable() {
        let bias = Vector3::new(0.02, -0.01, 0.015);
        let mut f = Tdkf::<f64>::new(TdkfConfig::default(), Vector3::zeros());
        for k in 0..6000 {
            f.predict(&bias, 0.005);
            if k % 2 == 1 {
                f.update(&Vector3::zeros()).unwrap();
            }
        }
        assert!((f.state.bias() - bias).norm() < 0.05 * bias.norm(), "{:?}", f.state.bias());
    }

    #[test]
    fn rejects_bad_measurement_covariance() {
        let mut f = Tdkf::<f64>::new(TdkfConfig::default(), Vector3::zeros());
        assert!(f.update_with(&Vector3::zeros(), &(-Matrix3::identity())).is_err());
    }
}
