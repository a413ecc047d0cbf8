//! Bagged CART ensembles with per-split feature subsampling.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{self, argmax_u32, DecisionTree, TreeParams};
use crate::linalg::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: None, min_samples_leaf: 1, max_features: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn votes(&self, x: &[f64]) -> Vec<u32> {
        let mut v = vec![0u32; self.n_classes];
        for t in &self.trees {
            v[t.predict(x)] += 1;
        }
        v
    }

    /// Majority vote, ties to the lower class.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_u32(&self.votes(x))
    }

    /// Vote shares.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let n = self.trees.len() as f64;
        self.votes(x).into_iter().map(|v| v as f64 / n).collect()
    }
}

pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, params: &ForestParams, seed: u64) -> RandomForest {
    let n = x.rows();
    let d = x.cols();
    let mf = params.max_features.unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1));
    let tp = TreeParams { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf, max_features: Some(mf) };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::sub_rng(seed, t as u64);
            let idx: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            tree::fit(x, y, n_classes, &idx, &tp, &mut rng)
        })
        .collect();
    RandomForest { n_classes, trees }
}
