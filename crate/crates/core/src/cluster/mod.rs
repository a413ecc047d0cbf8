//! K-means clustering, silhouette-based K selection and 2-D PCA projection.

mod kmeans;
mod pca;
mod silhouette;

pub use kmeans::{kmeans, KMeansParams};
pub use pca::{pca_project, PcaProjection};
pub use silhouette::silhouette_score;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: crate::linalg::Matrix,
    pub inertia: f64,
    /// Silhouette of this partition; `None` when k = 1.
    pub silhouette: Option<f64>,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

impl Clustering {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    pub scores: BTreeMap<usize, f64>,
}

/// Runs k-means for every k in `k_min..=k_max` and keeps the best silhouette.
/// Ties go to the smaller k.
pub fn select_k(m: &FeatureMatrix, k_min: usize, k_max: usize, seed: u64) -> Result<(KSelection, Clustering)> {
    let n = m.n();
    if k_min < 2 || k_min > k_max || k_max + 1 > n {
        return Err(Error::invalid(format!("k range {k_min}..={k_max} invalid for n = {n}")));
    }
    let mut scores = BTreeMap::new();
    let mut best: Option<Clustering> = None;
    for k in k_min..=k_max {
        let c = kmeans(m, k, seed, &KMeansParams::default())?;
        let s = c.silhouette.unwrap_or(f64::NEG_INFINITY);
        scores.insert(k, s);
        if best.as_ref().is_none_or(|b| s > b.silhouette.unwrap_or(f64::NEG_INFINITY)) {
            best = Some(c);
        }
    }
    let best = best.expect("non-empty k range");
    Ok((KSelection { k: best.k, scores }, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::seed;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn blobs(centers: &[Vec<f64>], per: usize, spread: f64, seed_: u64) -> FeatureMatrix {
        let mut rng = seed::rng(seed_);
        let mut rows = Vec::new();
        for c in centers {
            for _ in 0..per {
                rows.push(
                    c.iter()
                        .map(|&x| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            x + spread * z
                        })
                        .collect(),
                );
            }
        }
        FeatureMatrix::from_standardized(Matrix::from_rows(&rows))
    }

    #[test]
    fn two_blobs_select_two() {
        let m = blobs(&[vec![0.0, 0.0, 0.0], vec![10.0, 10.0, 0.0]], 40, 1.0, 4);
        let (sel, c) = select_k(&m, 2, 6, 1).unwrap();
        assert_eq!(sel.k, 2);
        assert_eq!(sel.scores.len(), 5);
        assert_eq!(c.k, 2);
    }

    #[test]
    fn three_blobs_select_three() {
        // inter-center distance 20 with unit spread
        let m = blobs(&[vec![0.0, 0.0], vec![20.0, 0.0], vec![10.0, 17.32]], 30, 1.0, 5);
        let (sel, _) = select_k(&m, 2, 6, 2).unwrap();
        assert_eq!(sel.k, 3, "{:?}", sel.scores);
        let (s3, s2) = (sel.scores[&3], sel.scores[&2]);
        assert!(s3 > s2);
    }

    #[test]
    fn degenerate_range() {
        let m = blobs(&[vec![0.0], vec![5.0]], 10, 0.5, 6);
        let (sel, _) = select_k(&m, 2, 2, 0).unwrap();
        assert_eq!(sel.k, 2);
        assert_eq!(sel.scores.len(), 1);
    }

    #[test]
    fn invalid_range() {
        let m = blobs(&[vec![0.0]], 5, 1.0, 0);
        assert!(select_k(&m, 1, 3, 0).is_err());
        assert!(select_k(&m, 3, 2, 0).is_err());
        assert!(select_k(&m, 2, 5, 0).is_err());
    }
}
