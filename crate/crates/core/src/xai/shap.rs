//! Interventional SHAP values for tree models and the closed form for the
//! logistic model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::supervised::tree::DecisionTree;
use crate::supervised::{Estimator, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub instance: String,
    pub class: usize,
    /// Expected output over the background.
    pub base_value: f64,
    pub phi: Vec<f64>,
    /// Output being explained, for the instance.
    pub output: f64,
}

impl Attribution {
    pub fn local_accuracy_gap(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.output).abs()
    }
}

/// `a!·b!/(a+b+1)!` via a running product; exact enough for a+b ≤ ~60.
fn shapley_weight(a: usize, b: usize) -> f64 {
    // a!b!/(a+b+1)! = 1 / ((a+b+1) · C(a+b, a))
    let n = a + b;
    let mut binom = 1.0;
    for i in 0..a.min(b) {
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    1.0 / ((n + 1) as f64 * binom)
}

/// Adds to `phi` the interventional Shapley values of `value(leaf)` for one
/// instance/background pair, and returns `value` at the background's leaf.
fn tree_pair(
    t: &DecisionTree,
    value: &dyn Fn(usize) -> f64,
    x: &[f64],
    z: &[f64],
    phi: &mut [f64],
) -> f64 {
    // features currently fixed to the instance (A) or to the background (B)
    let d = x.len();
    let mut side = vec![0i8; d];
    let mut a_set = Vec::new();
    let mut b_set = Vec::new();
    let mut z_leaf = 0.0;
    walk(t, value, 0, x, z, &mut side, &mut a_set, &mut b_set, phi, &mut z_leaf);
    z_leaf
}

#[allow(clippy::too_many_arguments)]
fn walk(
    t: &DecisionTree,
    value: &dyn Fn(usize) -> f64,
    node: usize,
    x: &[f64],
    z: &[f64],
    side: &mut [i8],
    a_set: &mut Vec<usize>,
    b_set: &mut Vec<usize>,
    phi: &mut [f64],
    z_leaf: &mut f64,
) {
    let Some(s) = t.nodes[node].split else {
        let v = value(node);
        let (a, b) = (a_set.len(), b_set.len());
        if a == 0 {
            // every divergence followed the background: this is its leaf
            *z_leaf = v;
        } else {
            let w = shapley_weight(a - 1, b) * v;
            a_set.iter().for_each(|&i| phi[i] += w);
        }
        if b > 0 {
            let w = shapley_weight(a, b - 1) * v;
            b_set.iter().for_each(|&j| phi[j] -= w);
        }
        return;
    };
    let f = s.feature;
    let go = |v: f64| if v <= s.threshold { s.left } else { s.right };
    let (nx, nz) = (go(x[f]), go(z[f]));
    if nx == nz {
        walk(t, value, nx, x, z, side, a_set, b_set, phi, z_leaf);
    } else {
        match side[f] {
            1 => walk(t, value, nx, x, z, side, a_set, b_set, phi, z_leaf),
            -1 => walk(t, value, nz, x, z, side, a_set, b_set, phi, z_leaf),
            _ => {
                side[f] = 1;
                a_set.push(f);
                walk(t, value, nx, x, z, side, a_set, b_set, phi, z_leaf);
                a_set.pop();
                side[f] = -1;
                b_set.push(f);
                walk(t, value, nz, x, z, side, a_set, b_set, phi, z_leaf);
                b_set.pop();
                side[f] = 0;
            }
        }
    }
}

/// Interventional SHAP of one tree's leaf `value` averaged over a background.
pub fn tree_shap_values(t: &DecisionTree, value: &dyn Fn(usize) -> f64, x: &[f64], background: &Matrix) -> Result<(f64, Vec<f64>)> {
    if background.rows() == 0 {
        return Err(Error::invalid("empty SHAP background"));
    }
    let mut phi = vec![0.0; x.len()];
    let mut base = 0.0;
    for z in background.iter_rows() {
        base += tree_pair(t, value, x, z, &mut phi);
    }
    let n = background.rows() as f64;
    phi.iter_mut().for_each(|p| *p /= n);
    Ok((base / n, phi))
}

/// Output explained for class `cls`: leaf class frequency for a single tree,
/// vote share for a forest, centered logit for the logistic model.
pub fn model_output(model: &Model, x: &[f64], cls: usize) -> f64 {
    match &model.estimator {
        Estimator::DecisionTree(t) => t.predict_proba(x)[cls],
        Estimator::RandomForest(f) => f.predict_proba(x)[cls],
        Estimator::LogisticRegression(m) => {
            let z = m.logits(x);
            z[cls] - z.iter().sum::<f64>() / z.len() as f64
        }
    }
}

pub fn shap_tree(model: &Model, instance: &str, x: &[f64], background: &Matrix, cls: usize) -> Result<Attribution> {
    let trees: Vec<(&DecisionTree, bool)> = match &model.estimator {
        Estimator::DecisionTree(t) => vec![(t, false)],
        Estimator::RandomForest(f) => f.trees.iter().map(|t| (t, true)).collect(),
        Estimator::LogisticRegression(_) => return Err(Error::invalid("tree SHAP needs a tree model")),
    };
    let mut phi = vec![0.0; x.len()];
    let mut base = 0.0;
    for (t, vote) in &trees {
        let value = |leaf: usize| {
            let node = &t.nodes[leaf];
            if *vote {
                f64::from(u8::from(node.class() == cls))
            } else {
                node.counts[cls] as f64 / node.n().max(1) as f64
            }
        };
        let (b, p) = tree_shap_values(t, &value, x, background)?;
        base += b;
        phi.iter_mut().zip(p).for_each(|(a, v)| *a += v);
    }
    let k = trees.len() as f64;
    phi.iter_mut().for_each(|p| *p /= k);
    Ok(Attribution { instance: instance.into(), class: cls, base_value: base / k, phi, output: model_output(model, x, cls) })
}

/// `phi_j = w_j (x_j - mean_j)` on the centered logit of `cls`.
pub fn shap_linear(model: &Model, instance: &str, x: &[f64], background: &Matrix, cls: usize) -> Result<Attribution> {
    let Estimator::LogisticRegression(m) = &model.estimator else {
        return Err(Error::invalid("linear SHAP needs a logistic model"));
    };
    if background.rows() == 0 {
        return Err(Error::invalid("empty SHAP background"));
    }
    let mean = background.column_means();
    let k = m.bias.len() as f64;
    let w: Vec<f64> = (0..x.len())
        .map(|j| m.weights.get(cls, j) - (0..m.bias.len()).map(|c| m.weights.get(c, j)).sum::<f64>() / k)
        .collect();
    let phi: Vec<f64> = (0..x.len()).map(|j| w[j] * (x[j] - mean[j])).collect();
    let base = model_output(model, &mean, cls);
    let output = model_output(model, x, cls);
    Ok(Attribution { instance: instance.into(), class: cls, base_value: base, phi, output })
}

pub fn shap(model: &Model, instance: &str, x: &[f64], background: &Matrix, cls: usize) -> Result<Attribution> {
    match model.estimator {
        Estimator::LogisticRegression(_) => shap_linear(model, instance, x, background, cls),
        _ => shap_tree(model, instance, x, background, cls),
    }
}

/// Shapley values by enumerating all coalitions of the value function
/// `v(S) = mean_z f(x_S, z_rest)`; exponential in the feature count.
pub fn brute_force_shap(f: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &Matrix) -> (f64, Vec<f64>) {
    let d = x.len();
    let v = |mask: usize| {
        let mut total = 0.0;
        for z in background.iter_rows() {
            let p: Vec<f64> = (0..d).map(|j| if mask & (1 << j) != 0 { x[j] } else { z[j] }).collect();
            total += f(&p);
        }
        total / background.rows() as f64
    };
    let values: Vec<f64> = (0..1usize << d).map(v).collect();
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        for mask in 0..1usize << d {
            if mask & (1 << i) == 0 {
                let s = mask.count_ones() as usize;
                let w = fact(s) * fact(d - s - 1) / fact(d);
                *p += w * (values[mask | (1 << i)] - values[mask]);
            }
        }
    }
    (values[0], phi)
}
