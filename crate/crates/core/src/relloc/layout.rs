//! Landmark layout check against flip ambiguities.
//!
//! PnP on a nearly planar constellation admits mirrored solutions. The
//! ambiguity stays resolvable while two landmarks are separated along the
//! optical axis by at least a seventh of the camera range.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::Serialize;

use super::RellocError;
use crate::scalar::Real;

/// Axial spread required per metre of range.
pub const AXIAL_SPREAD_PER_RANGE: f64 = 1.0 / 7.0;

/// Smallest-to-largest principal spread ratio below which a constellation is
/// reported as near planar.
pub const NEAR_PLANAR_RATIO: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayoutReport {
    /// Largest separation of two landmarks along the optical axis (m).
    pub axial_spread_m: f64,
    /// Spread needed at `max_range_m` (m).
    pub required_spread_m: f64,
    /// Largest range the measured spread supports (m).
    pub supported_range_m: f64,
    pub max_range_m: f64,
    /// Smallest over largest principal standard deviation of the constellation.
    pub planarity_ratio: f64,
    pub near_planar: bool,
    pub passes: bool,
    pub warnings: Vec<String>,
}

/// Checks the constellation seen along `axis` (landmark frame) up to `max_range`.
pub fn layout_check<T: Real>(points: &[Point3<T>], axis: &Vector3<T>, max_range: T) -> Result<LayoutReport, RellocError> {
    if points.len() < 4 {
        return Err(RellocError::InsufficientPoints(points.len()));
    }
    let a = axis.try_normalize(T::default_epsilon()).ok_or(RellocError::Degenerate)?;
    let depths: Vec<f64> = points.iter().map(|p| p.coords.dot(&a).as_f64()).collect();
    let lo = depths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = depths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let range = max_range.as_f64();
    let required = range * AXIAL_SPREAD_PER_RANGE;

    let n = T::from_count(points.len());
    let mean = points.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |s, p| {
        let d = p.coords - mean;
        s + d * d.transpose()
    }) / n;
    let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().map(|e| e.as_f64().max(0.0)).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let ratio = if ev[2] > 0.0 { (ev[0] / ev[2]).sqrt() } else { 0.0 };
    let near_planar = ratio < NEAR_PLANAR_RATIO;

    // Relative slack absorbs rounding in range / 7 at the exact bound.
    let spread_ok = spread >= required * (1.0 - 1e-12);
    let mut warnings = Vec::new();
    if near_planar {
        warnings.push(format!("near-planar landmark layout (principal spread ratio {ratio:.4}) admits flipped poses"));
    }
    if !spread_ok {
        warnings.push(format!(
            "axial spread {spread:.3} m is below the {required:.3} m needed at {range:.2} m; supported range is {:.2} m",
            spread / AXIAL_SPREAD_PER_RANGE
        ));
    }
    Ok(LayoutReport {
        axial_spread_m: spread,
        required_spread_m: required,
        supported_range_m: spread / AXIAL_SPREAD_PER_RANGE,
        max_range_m: range,
        planarity_ratio: ratio,
        near_planar,
        passes: spread_ok && !near_planar,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tetra(depth: f64) -> Vec<Point3<f64>> {
        vec![
            Point3::new(0.0, -0.75, 0.3),
            Point3::new(0.0, 0.75, 0.3),
            Point3::new(0.0, 0.0, 1.2),
            Point3::new(depth, 0.0, 0.6),
        ]
    }

    #[test]
    fn one_metre_spread_supports_seven_metres() {
        let r = layout_check(&tetra(1.0), &Vector3::x(), 7.0).unwrap();
        assert_eq!(r.axial_spread_m, 1.0);
        assert_relative_eq!(r.required_spread_m, 1.0, epsilon = 1e-15);
        assert!(r.passes, "{r:?}");
        assert!(!layout_check(&tetra(0.99), &Vector3::x(), 7.0).unwrap().passes);
    }

    #[test]
    fn three_metre_spread_supports_twenty_one() {
        let r = layout_check(&tetra(3.0), &Vector3::x(), 21.0).unwrap();
        assert_relative_eq!(r.supported_range_m, 21.0, epsilon = 1e-12);
        assert!(r.passes);
    }

    #[test]
    fn coplanar_square_fails() {
        let sq = vec![
            Point3::new(0.0, -0.5, 0.0),
            Point3::new(0.0, 0.5, 0.0),
            Point3::new(0.0, 0.5, 1.0),
            Point3::new(0.0, -0.5, 1.0),
        ];
        for range in [0.5, 7.0, 50.0] {
            let r = layout_check(&sq, &Vector3::x(), range).unwrap();
            assert!(r.near_planar && !r.passes);
            assert!(r.warnings.iter().any(|w| w.contains("near-planar")));
        }
        // Same square viewed edge-on still fails on planarity.
        assert!(!layout_check(&sq, &Vector3::y(), 7.0).unwrap().passes);
    }

    #[test]
    fn needs_four_points() {
        assert!(layout_check(&tetra(1.0)[..3], &Vector3::x(), 7.0).is_err());
    }
}
