//! CART classification trees (Gini impurity, midpoint thresholds).

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

/// A node keeps the class counts of the training samples that reached it;
/// for leaves these are the votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub counts: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn n(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Majority class, ties to the lower index.
    pub fn class(&self) -> usize {
        argmax_u32(&self.counts)
    }
}

pub(crate) fn argmax_u32(v: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in v.iter().enumerate() {
        if c > v[best] {
            best = i;
        }
    }
    best
}

pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: None, min_samples_leaf: 1, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_classes: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        i
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.nodes[self.leaf_index(x)].class()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let leaf = &self.nodes[self.leaf_index(x)];
        let n = leaf.n().max(1) as f64;
        leaf.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }
}

/// Grows a tree on the sample multiset `idx` (bootstrap duplicates allowed).
/// `rng` is only consulted when `max_features` restricts the candidates.
pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, idx: &[usize], params: &TreeParams, rng: &mut Rng) -> DecisionTree {
    let mut tree = DecisionTree { n_classes, nodes: Vec::new() };
    let min_leaf = params.min_samples_leaf.max(1);
    // (node slot, samples, depth)
    let mut stack = vec![(push_node(&mut tree, y, n_classes, idx), idx.to_vec(), 0usize)];
    while let Some((slot, samples, depth)) = stack.pop() {
        let counts = tree.nodes[slot].counts.clone();
        let parent = gini(&counts);
        if parent == 0.0 || params.max_depth.is_some_and(|m| depth >= m) || samples.len() < 2 * min_leaf {
            continue;
        }
        let d = x.cols();
        let features: Vec<usize> = match params.max_features {
            Some(k) if k < d => {
                let mut f = sample(rng, d, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let Some((feature, threshold, score)) = best_split(x, y, n_classes, &samples, &features, min_leaf) else {
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| x.get(i, feature) <= threshold);
        if score >= parent - 1e-12 {
            // A split without gain is kept only if it unlocks a gainful split
            // one level down (XOR-like interactions).
            let room = params.max_depth.is_none_or(|m| depth + 1 < m);
            let unlocks = |part: &[usize]| {
                let mut c = vec![0u32; n_classes];
                part.iter().for_each(|&i| c[y[i]] += 1);
                part.len() >= 2 * min_leaf
                    && best_split(x, y, n_classes, part, &features, min_leaf).is_some_and(|b| b.2 < gini(&c) - 1e-12)
            };
            if !(room && (unlocks(&l) || unlocks(&r))) {
                continue;
            }
        }
        let left = push_node(&mut tree, y, n_classes, &l);
        let right = push_node(&mut tree, y, n_classes, &r);
        tree.nodes[slot].split = Some(Split { feature, threshold, left, right });
        stack.push((right, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    tree
}

fn push_node(tree: &mut DecisionTree, y: &[usize], n_classes: usize, samples: &[usize]) -> usize {
    let mut counts = vec![0u32; n_classes];
    for &i in samples {
        counts[y[i]] += 1;
    }
    tree.nodes.push(Node { counts, split: None });
    tree.nodes.len() - 1
}

/// Lowest weighted Gini over candidate features and midpoints; earlier
/// features and lower thresholds win ties.
fn best_split(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    samples: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let n = samples.len();
    let mut total = vec![0u32; n_classes];
    for &i in samples {
        total[y[i]] += 1;
    }
    let mut best: Option<(usize, f64, f64)> = None;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &f in features {
        order.clear();
        order.extend(samples.iter().map(|&i| (x.get(i, f), y[i])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = vec![0u32; n_classes];
        for pos in 0..n - 1 {
            left[order[pos].1] += 1;
            let nl = pos + 1;
            if order[pos].0 == order[pos + 1].0 || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let right: Vec<u32> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let score = (nl as f64 * gini(&left) + (n - nl) as f64 * gini(&right)) / n as f64;
            if best.is_none_or(|b| score < b.2) {
                let mut thr = 0.5 * (order[pos].0 + order[pos + 1].0);
                // guard against rounding onto the upper value
                if thr >= order[pos + 1].0 {
                    thr = order[pos].0;
                }
                best = Some((f, thr, score));
            }
        }
    }
    best
}
