//! Scalar abstraction shared by the estimation code.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the filters, the mixture fitter and the
/// pose solver: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + core::fmt::Display + Default
{
    /// Converts an `f64` literal or configuration value into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    /// Lossy conversion back to `f64` for logging and metrics.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    /// Converts a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    #[inline]
    fn deg_to_rad(self) -> Self {
        self * Self::pi() / Self::lit(180.0)
    }

    #[inline]
    fn rad_to_deg(self) -> Self {
        self * Self::lit(180.0) / Self::pi()
    }
}

impl Real for f32 {}
impl Real for f64 {}
