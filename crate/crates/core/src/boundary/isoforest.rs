//! Isolation forest anomaly scores.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed::{self, Rng};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average unsuccessful-search path length in a binary search tree of n keys.
pub fn c(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ITreeNode {
    Leaf { size: usize },
    Split { feature: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ITree {
    nodes: Vec<ITreeNode>,
}

impl ITree {
    fn path_length(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[i] {
                ITreeNode::Leaf { size } => return depth + c(size),
                ITreeNode::Split { feature, value, left, right } => {
                    i = if x[feature] < value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    trees: Vec<ITree>,
    pub psi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoParams {
    pub n_trees: usize,
    /// Subsample size; `None` means `min(64, n)`.
    pub psi: Option<usize>,
}

impl Default for IsoParams {
    fn default() -> Self {
        IsoParams { n_trees: 100, psi: None }
    }
}

impl IsolationForest {
    pub fn fit(points: &Matrix, params: &IsoParams, seed: u64) -> Result<IsolationForest> {
        let n = points.rows();
        let psi = params.psi.unwrap_or(64.min(n));
        if psi < 2 || psi > n {
            return Err(Error::invalid(format!("subsample size {psi} must lie in [2, {n}]")));
        }
        if params.n_trees == 0 {
            return Err(Error::invalid("isolation forest needs at least one tree"));
        }
        let cap = (psi as f64).log2().ceil() as usize;
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::sub_rng(seed, t as u64);
                let mut idx = sample(&mut rng, n, psi).into_vec();
                let mut tree = ITree { nodes: Vec::new() };
                grow(&mut tree, points, &mut idx, 0, cap, &mut rng);
                tree
            })
            .collect();
        Ok(IsolationForest { trees, psi })
    }

    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// `2^(-E[h(x)] / c(psi))`.
    pub fn score(&self, x: &[f64]) -> f64 {
        (-self.mean_path_length(x) / c(self.psi)).exp2()
    }
}

fn grow(tree: &mut ITree, pts: &Matrix, idx: &mut [usize], depth: usize, cap: usize, rng: &mut Rng) -> usize {
    let slot = tree.nodes.len();
    tree.nodes.push(ITreeNode::Leaf { size: idx.len() });
    if idx.len() <= 1 || depth >= cap {
        return slot;
    }
    let ranges: Vec<(usize, f64, f64)> = (0..pts.cols())
        .filter_map(|j| {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = pts.get(i, j);
                (lo.min(v), hi.max(v))
            });
            (hi > lo).then_some((j, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return slot;
    }
    let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let mut value = rng.random_range(lo..hi);
    if value <= lo {
        value = 0.5 * (lo + hi);
    }
    idx.sort_by(|&a, &b| (pts.get(a, feature) >= value).cmp(&(pts.get(b, feature) >= value)).then(a.cmp(&b)));
    let mid = idx.iter().position(|&i| pts.get(i, feature) >= value).unwrap_or(idx.len());
    let (l, r) = idx.split_at_mut(mid);
    let left = grow(tree, pts, l, depth + 1, cap, rng);
    let right = grow(tree, pts, r, depth + 1, cap, rng);
    tree.nodes[slot] = ITreeNode::Split { feature, value, left, right };
    slot
}
