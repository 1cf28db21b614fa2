//! Frequency clustering and landmark identification.
//!
//! Each window of polarity transitions is reduced to a one-dimensional
//! frequency sample, fitted by a Gaussian mixture whose size is chosen by an
//! information criterion, split into hard clusters, spatially cleaned by
//! keeping the largest connected blob, and matched against the registry of
//! nominal landmark frequencies.

mod bic;
mod blob;
mod cluster;
mod em;
mod identify;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bic::{bic_score, pooled_variance, select_model, BicMode, BicScore, ModelSelection, FIXED_PARAMETER_COUNT};
pub use blob::{extract_centroid, Centroid, DEFAULT_MIN_BLOB_PIXELS};
pub use cluster::{assign_clusters, Cluster, ClusterSet};
pub use em::{em_fit, CompressedSample, EmConfig, GaussianComponent, GmmModel};
pub use identify::{
    identify_landmarks, ClusterCandidate, LandmarkMeasurement, LandmarkRegistry, NvbmFrame, RegisteredLandmark,
    DEFAULT_MATCH_TOLERANCE_HZ,
};

use crate::error::{write_csv_rows, DataError};
use crate::events::TransitionWindow;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmmError {
    #[error("mixture needs at least one component")]
    ZeroComponents,
    #[error("{samples} samples cannot support {components} components")]
    InsufficientData { samples: usize, components: usize },
    #[error("frequency sample contains a non-finite value")]
    NonFinite,
    #[error("cluster has no members")]
    EmptyCluster,
    #[error("largest blob has {pixels} pixels, below the minimum of {min}")]
    SmallBlob { pixels: usize, min: usize },
}

/// Settings for per-window identification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentConfig {
    pub j_max: usize,
    pub bic_mode: BicMode,
    pub em_tol: f64,
    pub em_max_iter: usize,
    /// Hz².
    pub var_floor: f64,
    pub merge_gap_hz: f64,
    pub min_blob_pixels: usize,
    pub match_tolerance_hz: f64,
}

impl Default for IdentConfig {
    fn default() -> Self {
        Self {
            j_max: 10,
            bic_mode: BicMode::Standard,
            em_tol: 1e-6,
            em_max_iter: 100,
            var_floor: 1.0,
            merge_gap_hz: 10.0,
            min_blob_pixels: DEFAULT_MIN_BLOB_PIXELS,
            match_tolerance_hz: DEFAULT_MATCH_TOLERANCE_HZ,
        }
    }
}

impl IdentConfig {
    pub fn em<T: Real>(&self) -> EmConfig<T> {
        EmConfig {
            tol: T::lit(self.em_tol),
            max_iter: self.em_max_iter,
            var_floor: T::lit(self.var_floor),
            restart_on_degenerate: true,
        }
    }
}

/// Everything produced for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowIdentification<T> {
    pub frame: NvbmFrame<T>,
    /// `None` when the window held no transitions.
    pub selection: Option<ModelSelection<T>>,
    /// Clusters after merging, before blob masking.
    pub clusters: Option<ClusterSet<T>>,
    /// Clusters dropped as clutter by blob masking.
    pub rejected_clusters: usize,
}

impl<T: Real> WindowIdentification<T> {
    pub fn j_opt(&self) -> usize {
        self.selection.as_ref().map_or(0, |s| s.j_opt)
    }

    /// Writes `<stem>_samples.csv` with one row per transition and
    /// `<stem>_model.csv` with the score of every candidate `J` followed by the
    /// components of the selected fit.
    pub fn write_dump(&self, window: &TransitionWindow, dir: &Path, stem: &str) -> Result<(), DataError> {
        #[derive(Serialize)]
        struct SampleRow {
            f: f64,
            cluster: i64,
            x: u16,
            y: u16,
        }
        #[derive(Serialize)]
        struct ModelRow {
            kind: &'static str,
            j: usize,
            mu: f64,
            sigma2: f64,
            pi: f64,
            gamma: f64,
        }
        let mut cluster_of = vec![-1i64; window.len()];
        if let Some(cs) = &self.clusters {
            for (k, c) in cs.clusters.iter().enumerate() {
                for &m in &c.members {
                    cluster_of[m] = k as i64;
                }
            }
        }
        let samples: Vec<SampleRow> = window
            .transitions()
            .iter()
            .zip(&cluster_of)
            .map(|(d, &c)| SampleRow { f: d.f, cluster: c, x: d.x, y: d.y })
            .collect();
        write_csv_rows(&dir.join(format!("{stem}_samples.csv")), &samples)?;

        let mut rows = Vec::new();
        if let Some(sel) = &self.selection {
            for s in &sel.scores {
                rows.push(ModelRow {
                    kind: "score",
                    j: s.j,
                    mu: f64::NAN,
                    sigma2: s.error_cov.as_f64(),
                    pi: f64::NAN,
                    gamma: s.gamma.as_f64(),
                });
            }
            for c in &sel.model.components {
                rows.push(ModelRow {
                    kind: "component",
                    j: sel.j_opt,
                    mu: c.mean.as_f64(),
                    sigma2: c.var.as_f64(),
                    pi: c.weight.as_f64(),
                    gamma: f64::NAN,
                });
            }
        }
        write_csv_rows(&dir.join(format!("{stem}_model.csv")), &rows)
    }
}

/// Runs selection, clustering, merging, blob masking and identification on
/// the window's current content.
pub fn identify_window<T: Real>(
    window: &TransitionWindow,
    registry: &LandmarkRegistry,
    cfg: &IdentConfig,
    seed: u64,
) -> Result<WindowIdentification<T>, GmmError> {
    let t = window.t_now();
    let f: Vec<T> = window.transitions().iter().map(|d| T::lit(d.f)).collect();
    let Some(selection) = select_model(&f, cfg.j_max, cfg.bic_mode, &cfg.em::<T>(), seed)? else {
        return Ok(WindowIdentification {
            frame: NvbmFrame::empty(t),
            selection: None,
            clusters: None,
            rejected_clusters: 0,
        });
    };
    let clusters = assign_clusters(&selection.model).merged(T::lit(cfg.merge_gap_hz));
    let f_d = T::lit(window.detection_resolution_hz());
    let mut candidates = Vec::new();
    let mut rejected = 0;
    let transitions = window.transitions();
    for c in &clusters.clusters {
        if c.mean < f_d {
            rejected += 1;
            continue;
        }
        let pixels: Vec<(u16, u16)> = c.members.iter().map(|&i| (transitions[i].x, transitions[i].y)).collect();
        match extract_centroid::<T>(&pixels, cfg.min_blob_pixels) {
            Ok(cen) => candidates.push(ClusterCandidate {
                mean_hz: c.mean,
                center: cen.pixel,
                pixel_count: cen.blob_pixels,
                member_count: c.members.len(),
            }),
            Err(_) => rejected += 1,
        }
    }
    let frame = identify_landmarks(t, &candidates, registry, cfg.match_tolerance_hz);
    Ok(WindowIdentification {
        frame,
        selection: Some(selection),
        clusters: Some(clusters),
        rejected_clusters: rejected,
    })
}
