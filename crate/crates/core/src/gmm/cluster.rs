//! Hard assignment of transitions to mixture components and merging of
//! near-duplicate clusters.

use super::em::GmmModel;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster<T> {
    /// Mean frequency (Hz).
    pub mean: T,
    /// Indices into the window's transition list.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSet<T> {
    pub j_opt: usize,
    /// One entry per component before merging, including empty ones.
    pub clusters: Vec<Cluster<T>>,
}

impl<T: Real> ClusterSet<T> {
    pub fn member_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    /// Merges clusters whose means differ by less than `min_gap` Hz. Means of
    /// merged clusters are member-count weighted; empty clusters are dropped.
    pub fn merged(&self, min_gap: T) -> ClusterSet<T> {
        let mut sorted: Vec<&Cluster<T>> = self.clusters.iter().filter(|c| !c.members.is_empty()).collect();
        sorted.sort_by(|a, b| a.mean.partial_cmp(&b.mean).unwrap());
        let mut out: Vec<Cluster<T>> = Vec::new();
        for c in sorted {
            match out.last_mut() {
                Some(last) if (c.mean - last.mean).abs() < min_gap => {
                    let na = T::from_count(last.members.len());
                    let nb = T::from_count(c.members.len());
                    last.mean = (last.mean * na + c.mean * nb) / (na + nb);
                    last.members.extend_from_slice(&c.members);
                }
                _ => out.push(c.clone()),
            }
        }
        for c in &mut out {
            c.members.sort_unstable();
        }
        ClusterSet {
            j_opt: self.j_opt,
            clusters: out,
        }
    }
}

/// Assigns every sample to its highest-responsibility component; ties go to
/// the lower component index.
pub fn assign_clusters<T: Real>(model: &GmmModel<T>) -> ClusterSet<T> {
    let j = model.n_components();
    let mut clusters: Vec<Cluster<T>> = model
        .components
        .iter()
        .map(|c| Cluster {
            mean: c.mean,
            members: Vec::new(),
        })
        .collect();
    for n in 0..model.n_samples() {
        let row = model.responsibility_row(n);
        let mut best = 0;
        for k in 1..j {
            if row[k] > row[best] {
                best = k;
            }
        }
        clusters[best].members.push(n);
    }
    ClusterSet { j_opt: j, clusters }
}
