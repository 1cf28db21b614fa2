//! Matching clusters to the registry of nominal landmark frequencies.

use nalgebra::{Point3, Vector2};
use serde::{Deserialize, Serialize};

use crate::events::Micros;
use crate::scalar::Real;

/// Default half-width of the frequency match band (Hz).
pub const DEFAULT_MATCH_TOLERANCE_HZ: f64 = 25.0;

/// A known landmark: its flicker frequency and position in the landmark frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegisteredLandmark {
    pub id: u32,
    pub frequency_hz: f64,
    pub position: Point3<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRegistry {
    pub landmarks: Vec<RegisteredLandmark>,
}

impl LandmarkRegistry {
    pub fn new(landmarks: Vec<RegisteredLandmark>) -> Self {
        Self { landmarks }
    }

    pub fn get(&self, id: u32) -> Option<&RegisteredLandmark> {
        self.landmarks.iter().find(|l| l.id == id)
    }

    /// Whether all nominal frequencies are pairwise distinct.
    pub fn frequencies_distinct(&self) -> bool {
        let mut f: Vec<f64> = self.landmarks.iter().map(|l| l.frequency_hz).collect();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        f.windows(2).all(|w| w[0] != w[1])
    }
}

/// A cluster that survived blob masking, ready for identification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterCandidate<T> {
    pub mean_hz: T,
    pub center: Vector2<T>,
    pub pixel_count: usize,
    pub member_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LandmarkMeasurement<T> {
    pub id: u32,
    pub nominal_hz: f64,
    pub mean_hz: T,
    pub center: Vector2<T>,
    pub pixel_count: usize,
    pub member_count: usize,
}

/// Identified landmark centres for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct NvbmFrame<T> {
    pub t: Micros,
    pub measurements: Vec<LandmarkMeasurement<T>>,
    /// Set when two clusters were equally close to one nominal frequency.
    pub ambiguous: bool,
}

impl<T: Real> NvbmFrame<T> {
    pub fn empty(t: Micros) -> Self {
        Self {
            t,
            measurements: Vec::new(),
            ambiguous: false,
        }
    }

    pub fn get(&self, id: u32) -> Option<&LandmarkMeasurement<T>> {
        self.measurements.iter().find(|m| m.id == id)
    }
}

/// Assigns each candidate to the nearest nominal frequency strictly inside
/// `tolerance_hz`. Each nominal keeps its closest candidate; exact distance
/// ties keep the candidate with more members and flag the frame ambiguous.
/// Measurements are ordered by landmark id.
pub fn identify_landmarks<T: Real>(
    t: Micros,
    candidates: &[ClusterCandidate<T>],
    registry: &LandmarkRegistry,
    tolerance_hz: f64,
) -> NvbmFrame<T> {
    let mut frame = NvbmFrame::empty(t);
    let mut chosen: Vec<Option<(f64, ClusterCandidate<T>)>> = vec![None; registry.landmarks.len()];
    for cand in candidates {
        let mean = cand.mean_hz.as_f64();
        let nearest = registry
            .landmarks
            .iter()
            .enumerate()
            .map(|(i, l)| (i, (mean - l.frequency_hz).abs()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let Some((i, dist)) = nearest else { continue };
        if dist >= tolerance_hz {
            continue;
        }
        match &chosen[i] {
            None => chosen[i] = Some((dist, *cand)),
            Some((d0, c0)) => {
                if dist < *d0 {
                    chosen[i] = Some((dist, *cand));
                } else if dist == *d0 {
                    frame.ambiguous = true;
                    if cand.member_count > c0.member_count {
                        chosen[i] = Some((dist, *cand));
                    }
                }
            }
        }
    }
    for (l, c) in registry.landmarks.iter().zip(chosen) {
        if let Some((_, c)) = c {
            frame.measurements.push(LandmarkMeasurement {
                id: l.id,
                nominal_hz: l.frequency_hz,
                mean_hz: c.mean_hz,
                center: c.center,
                pixel_count: c.pixel_count,
                member_count: c.member_count,
            });
        }
    }
    frame.measurements.sort_by_key(|m| m.id);
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> LandmarkRegistry {
        let f = [200.0, 250.0, 300.0, 350.0, 400.0, 500.0, 600.0];
        LandmarkRegistry::new(
            f.iter()
                .enumerate()
                .map(|(i, &f)| RegisteredLandmark {
                    id: i as u32,
                    frequency_hz: f,
                    position: Point3::origin(),
                })
                .collect(),
        )
    }

    fn cand(mean: f64, members: usize) -> ClusterCandidate<f64> {
        ClusterCandidate {
            mean_hz: mean,
            center: Vector2::new(10.0, 20.0),
            pixel_count: members,
            member_count: members,
        }
    }

    #[test]
    fn nearest_nominal_is_chosen() {
        let fr = identify_landmarks(0, &[cand(498.7, 10)], &registry(), DEFAULT_MATCH_TOLERANCE_HZ);
        assert_eq!(fr.measurements.len(), 1);
        assert_eq!(fr.measurements[0].id, 5);
        assert_eq!(fr.measurements[0].nominal_hz, 500.0);
    }

    #[test]
    fn band_edge_is_excluded() {
        let fr = identify_landmarks(0, &[cand(225.0, 10), cand(550.0, 4)], &registry(), DEFAULT_MATCH_TOLERANCE_HZ);
        assert!(fr.measurements.is_empty());
        let fr = identify_landmarks(0, &[cand(700.0, 10)], &registry(), DEFAULT_MATCH_TOLERANCE_HZ);
        assert!(fr.measurements.is_empty());
    }

    #[test]
    fn closer_cluster_wins() {
        let fr = identify_landmarks(0, &[cand(305.0, 50), cand(301.0, 5)], &registry(), 25.0);
        assert_eq!(fr.measurements.len(), 1);
        assert_eq!(fr.measurements[0].mean_hz, 301.0);
        assert!(!fr.ambiguous);
    }

    #[test]
    fn equal_distance_keeps_larger_and_flags() {
        let fr = identify_landmarks(0, &[cand(296.0, 5), cand(304.0, 9)], &registry(), 25.0);
        assert_eq!(fr.measurements[0].mean_hz, 304.0);
        assert!(fr.ambiguous);
    }

    #[test]
    fn ids_are_unique_and_sorted() {
        let cs = [cand(601.0, 3), cand(199.0, 3), cand(351.0, 3), cand(352.0, 3)];
        let fr = identify_landmarks(0, &cs, &registry(), 25.0);
        let ids: Vec<u32> = fr.measurements.iter().map(|m| m.id).collect();
        assert_eq!(ids, vec![0, 3, 6]);
    }
}
