//! Linear Kalman measurement update shared by the pixel tracker and the
//! translation filter.

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum KalmanError {
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,
    #[error("measurement covariance is not symmetric positive definite")]
    InvalidMeasurementCovariance,
}

/// Result of a gated measurement update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UpdateOutcome<T> {
    /// Applied; carries the squared Mahalanobis distance of the innovation.
    Accepted(T),
    /// Rejected by the gate; state and covariance untouched.
    Gated(T),
}

impl<T: Copy> UpdateOutcome<T> {
    pub fn accepted(&self) -> bool {
        matches!(self, Self::Accepted(_))
    }

    pub fn mahalanobis_sq(&self) -> T {
        match *self {
            Self::Accepted(d) | Self::Gated(d) => d,
        }
    }
}

/// Whether `m` is symmetric with a Cholesky factor.
pub fn is_spd<T: Real, const N: usize>(m: &SMatrix<T, N, N>) -> bool {
    let scale = m.amax().max(T::one());
    let sym = (m - m.transpose()).amax() <= T::default_epsilon().sqrt() * scale;
    sym && m.cholesky().is_some()
}

/// Gated update with the Joseph form `P = (I - KH) P (I - KH)ᵀ + K R Kᵀ`,
/// which keeps `P` symmetric positive definite under rounding.
pub fn joseph_update<T: Real, const N: usize, const M: usize>(
    x: &mut SVector<T, N>,
    p: &mut SMatrix<T, N, N>,
    h: &SMatrix<T, M, N>,
    r: &SMatrix<T, M, M>,
    z: &SVector<T, M>,
    gate: Option<T>,
) -> Result<UpdateOutcome<T>, KalmanError> {
    let innovation = z - h * *x;
    let s = h * *p * h.transpose() + r;
    let s = (s + s.transpose()) * T::lit(0.5);
    let chol = s.cholesky().ok_or(KalmanError::SingularInnovation)?;
    let d2 = innovation.dot(&chol.solve(&innovation));
    if let Some(g) = gate {
        if !(d2 <= g) {
            return Ok(UpdateOutcome::Gated(d2));
        }
    }
    // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ since S and P are symmetric.
    let k = chol.solve(&(h * *p)).transpose();
    *x += k * innovation;
    let ikh = SMatrix::<T, N, N>::identity() - k * h;
    let joseph = ikh * *p * ikh.transpose() + k * r * k.transpose();
    *p = (joseph + joseph.transpose()) * T::lit(0.5);
    Ok(UpdateOutcome::Accepted(d2))
}
