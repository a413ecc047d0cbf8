//! Multinomial logistic regression with an L2 penalty, fit by gradient
//! descent with backtracking line search.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Matrix};

const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// `n_classes × d` weights, row-major.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub l2: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl LogisticModel {
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.bias.len()).map(|c| self.bias[c] + dot(self.weights.row(c), x)).collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Parameters packed as `[W (c×d row-major), b (c)]`.
struct Problem<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    c: usize,
    l2: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.c * self.x.cols() + self.c
    }

    fn loss_grad(&self, theta: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let (n, d, c) = (self.x.rows(), self.x.cols(), self.c);
        let (w, b) = theta.split_at(c * d);
        let mut grad = if want_grad { vec![0.0; theta.len()] } else { vec![] };
        let mut loss = 0.0;
        for i in 0..n {
            let xi = self.x.row(i);
            let z: Vec<f64> = (0..c).map(|k| b[k] + dot(&w[k * d..(k + 1) * d], xi)).collect();
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - z[self.y[i]];
            if want_grad {
                for k in 0..c {
                    let r = (z[k] - lse).exp() - if k == self.y[i] { 1.0 } else { 0.0 };
                    for j in 0..d {
                        grad[k * d + j] += r * xi[j];
                    }
                    grad[c * d + k] += r;
                }
            }
        }
        let nf = n as f64;
        loss /= nf;
        let wsq: f64 = w.iter().map(|v| v * v).sum();
        loss += 0.5 * self.l2 * wsq;
        if want_grad {
            grad.iter_mut().for_each(|g| *g /= nf);
            for (g, wv) in grad[..c * d].iter_mut().zip(w) {
                *g += self.l2 * wv;
            }
        }
        (loss, grad)
    }
}

/// Mean cross-entropy plus `l2/2·‖W‖²` and its gradient; exposed for testing.
pub fn objective(x: &Matrix, y: &[usize], n_classes: usize, l2: f64, weights: &Matrix, bias: &[f64]) -> (f64, Matrix, Vec<f64>) {
    let p = Problem { x, y, c: n_classes, l2 };
    let mut theta = weights.as_slice().to_vec();
    theta.extend_from_slice(bias);
    let (l, g) = p.loss_grad(&theta, true);
    let cd = n_classes * x.cols();
    (l, Matrix::from_vec(n_classes, x.cols(), g[..cd].to_vec()), g[cd..].to_vec())
}

pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, l2: f64) -> LogisticModel {
    let p = Problem { x, y, c: n_classes, l2 };
    let mut theta = vec![0.0; p.dim()];
    let (mut loss, mut grad) = p.loss_grad(&theta, true);
    let mut step = 1.0;
    let mut iterations = 0;
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    while iterations < MAX_ITER && norm(&grad) > GRAD_TOL {
        iterations += 1;
        let gsq: f64 = grad.iter().map(|v| v * v).sum();
        step *= 2.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let (l, _) = p.loss_grad(&cand, false);
            if l <= loss - 0.5 * step * gsq || step < 1e-12 {
                theta = cand;
                break;
            }
            step *= 0.5;
        }
        (loss, grad) = p.loss_grad(&theta, true);
    }
    let d = x.cols();
    LogisticModel {
        weights: Matrix::from_vec(n_classes, d, theta[..n_classes * d].to_vec()),
        bias: theta[n_classes * d..].to_vec(),
        l2,
        iterations,
        grad_norm: norm(&grad),
    }
}
