use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{silhouette_score, Clustering};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams { n_init: 10, max_iter: 300, tol: 1e-6 }
    }
}

struct Run {
    labels: Vec<usize>,
    centroids: Matrix,
    inertia: f64,
    history: Vec<f64>,
}

fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(x, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(x: &Matrix, k: usize, rng: &mut seed::Rng) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            // guard against round-off landing on an already chosen point
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centroids.row(c)));
        }
    }
    centroids
}

/// Assigns labels; empty clusters are reseeded with the point farthest from
/// its current centroid.
fn assign(x: &Matrix, centroids: &mut Matrix, labels: &mut [usize]) -> f64 {
    let k = centroids.rows();
    let mut dists = vec![0.0; x.rows()];
    for i in 0..x.rows() {
        let (c, d) = nearest(x.row(i), centroids);
        labels[i] = c;
        dists[i] = d;
    }
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
        let far = (0..x.rows())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
            .expect("k <= n guarantees a donor cluster");
        centroids.row_mut(empty).copy_from_slice(x.row(far));
        labels[far] = empty;
        dists[far] = 0.0;
    }
    dists.iter().sum()
}

fn update(x: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let mut c = Matrix::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (a, b) in c.row_mut(l).iter_mut().zip(x.row(i)) {
            *a += b;
        }
    }
    for (l, &cnt) in counts.iter().enumerate() {
        c.row_mut(l).iter_mut().for_each(|v| *v /= cnt.max(1) as f64);
    }
    c
}

fn lloyd(x: &Matrix, k: usize, params: &KMeansParams, rng: &mut seed::Rng) -> Run {
    let mut centroids = plus_plus_init(x, k, rng);
    let mut labels = vec![0; x.rows()];
    let mut history = Vec::new();
    for _ in 0..params.max_iter {
        history.push(assign(x, &mut centroids, &mut labels));
        let next = update(x, &labels, k);
        let shift = (0..k).map(|c| sq_dist(next.row(c), centroids.row(c)).sqrt()).fold(0.0, f64::max);
        centroids = next;
        if shift < params.tol {
            break;
        }
    }
    let inertia = assign(x, &mut centroids, &mut labels);
    history.push(inertia);
    Run { labels, centroids, inertia, history }
}

/// Best-inertia k-means over `n_init` k-means++ restarts.
///
/// Restart `r` draws from its own stream derived from `(seed, r)`; the winner
/// is the lexicographic minimum of `(inertia, r)`.
pub fn kmeans(m: &FeatureMatrix, k: usize, seed: u64, params: &KMeansParams) -> Result<Clustering> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    if params.n_init == 0 {
        return Err(Error::invalid("n_init must be at least 1"));
    }
    let x = &m.values;
    let runs: Vec<Run> = (0..params.n_init)
        .into_par_iter()
        .map(|r| lloyd(x, k, params, &mut seed::sub_rng(seed, r as u64)))
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(ra, a), (rb, b)| a.inertia.total_cmp(&b.inertia).then(ra.cmp(rb)))
        .map(|(_, r)| r)
        .expect("n_init >= 1");
    let silhouette = if k >= 2 { Some(silhouette_score(m, &best.labels)?) } else { None };
    Ok(Clustering {
        k,
        labels: best.labels,
        centroids: best.centroids,
        inertia: best.inertia,
        silhouette,
        inertia_history: best.history,
    })
}
