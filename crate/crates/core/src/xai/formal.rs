//! Sufficient reasons: subsets of an instance's conditions that force the
//! model's class for every completion.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::supervised::tree::DecisionTree;
use crate::supervised::{Estimator, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Le => "≤",
            Op::Gt => ">",
            Op::Eq => "=",
        })
    }
}

/// A condition on one feature of the model's (standardized) input space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Literal {
    pub feature: usize,
    pub op: Op,
    pub value: f64,
}

impl Literal {
    pub fn holds(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        match self.op {
            Op::Le => v <= self.value,
            Op::Gt => v > self.value,
            Op::Eq => v == self.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub literals: Vec<Literal>,
    pub class: usize,
}

impl Rule {
    pub fn holds(&self, x: &[f64]) -> bool {
        self.literals.iter().all(|l| l.holds(x))
    }

    pub fn features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.literals.iter().map(|l| l.feature).collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Set of reals between two bounds, each open or closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl Interval {
    pub const REAL: Interval = Interval { lo: f64::NEG_INFINITY, lo_closed: false, hi: f64::INFINITY, hi_closed: false };

    pub fn closed(lo: f64, hi: f64) -> Interval {
        Interval { lo, lo_closed: true, hi, hi_closed: true }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, v: f64) -> bool {
        (v > self.lo || (self.lo_closed && v == self.lo)) && (v < self.hi || (self.hi_closed && v == self.hi))
    }

    /// Intersection with `(-inf, t]`.
    pub fn at_most(self, t: f64) -> Interval {
        if t < self.hi {
            Interval { hi: t, hi_closed: true, ..self }
        } else {
            self
        }
    }

    /// Intersection with `(t, inf)`.
    pub fn above(self, t: f64) -> Interval {
        if t > self.lo || (t == self.lo && self.lo_closed) {
            Interval { lo: t, lo_closed: false, ..self }
        } else {
            self
        }
    }

    pub fn apply(self, l: &Literal) -> Interval {
        match l.op {
            Op::Le => self.at_most(l.value),
            Op::Gt => self.above(l.value),
            Op::Eq => {
                if self.contains(l.value) {
                    Interval::closed(l.value, l.value)
                } else {
                    Interval { lo: 1.0, lo_closed: false, hi: 0.0, hi_closed: false }
                }
            }
        }
    }
}

/// Feature domains: the real line for trees, the training range for the
/// logistic model.
pub fn domains(model: &Model) -> Vec<Interval> {
    match model.estimator {
        Estimator::LogisticRegression(_) => model.domain.iter().map(|&[lo, hi]| Interval::closed(lo, hi)).collect(),
        _ => vec![Interval::REAL; model.feature_names.len()],
    }
}

pub fn feasible_box(model: &Model, literals: &[Literal]) -> Result<Vec<Interval>> {
    let mut b = domains(model);
    for l in literals {
        if l.feature >= b.len() {
            return Err(Error::invalid(format!("literal on unknown feature {}", l.feature)));
        }
        b[l.feature] = b[l.feature].apply(l);
    }
    if b.iter().any(Interval::is_empty) {
        return Err(Error::invalid("inconsistent literals"));
    }
    Ok(b)
}

/// Classes of the leaves reachable under the box, as a bit mask.
pub fn reachable_classes(tree: &DecisionTree, bx: &[Interval]) -> u64 {
    let mut mask = 0u64;
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let node = &tree.nodes[i];
        match node.split {
            None => mask |= 1 << node.class(),
            Some(s) => {
                let iv = bx[s.feature];
                if !iv.at_most(s.threshold).is_empty() {
                    stack.push(s.left);
                }
                if !iv.above(s.threshold).is_empty() {
                    stack.push(s.right);
                }
            }
        }
    }
    mask
}

/// True only if every completion of `literals` inside the feature domains is
/// classified as `cls`. Exact for trees; a sound relaxation for forests and
/// for logistic models with more than two classes.
pub fn forced_class_check(model: &Model, literals: &[Literal], cls: usize) -> Result<bool> {
    let bx = feasible_box(model, literals)?;
    Ok(match &model.estimator {
        Estimator::DecisionTree(t) => reachable_classes(t, &bx) == 1 << cls,
        Estimator::RandomForest(f) => {
            let masks: Vec<u64> = f.trees.iter().map(|t| reachable_classes(t, &bx)).collect();
            let sure = masks.iter().filter(|&&m| m == 1 << cls).count();
            (0..f.n_classes).filter(|&c| c != cls).all(|c| {
                let rival = masks.iter().filter(|&&m| m & (1 << c) != 0).count();
                sure > rival || (sure == rival && cls < c)
            })
        }
        Estimator::LogisticRegression(m) => (0..model.n_classes).filter(|&c| c != cls).all(|c| {
            // sup over the box of logit_c - logit_cls
            let mut sup = m.bias[c] - m.bias[cls];
            for (j, iv) in bx.iter().enumerate() {
                let w = m.weights.get(c, j) - m.weights.get(cls, j);
                if w > 0.0 {
                    sup += w * iv.hi;
                } else if w < 0.0 {
                    sup += w * iv.lo;
                }
            }
            sup < 0.0 || (sup == 0.0 && cls < c)
        }),
    })
}

/// The instance's full literal set: split conditions along its decision
/// paths for tree models, one equality per feature for the logistic model.
pub fn instance_literals(model: &Model, x: &[f64]) -> Vec<Literal> {
    let mut lits = Vec::new();
    let mut path = |t: &DecisionTree| {
        let mut i = 0;
        while let Some(s) = t.nodes[i].split {
            let (op, next) = if x[s.feature] <= s.threshold { (Op::Le, s.left) } else { (Op::Gt, s.right) };
            lits.push(Literal { feature: s.feature, op, value: s.threshold });
            i = next;
        }
    };
    match &model.estimator {
        Estimator::DecisionTree(t) => path(t),
        Estimator::RandomForest(f) => f.trees.iter().for_each(path),
        Estimator::LogisticRegression(_) => {
            return x.iter().enumerate().map(|(feature, &value)| Literal { feature, op: Op::Eq, value }).collect()
        }
    }
    lits.sort_by(|a, b| a.feature.cmp(&b.feature).then(a.op.cmp(&b.op)).then(a.value.total_cmp(&b.value)));
    lits.dedup();
    lits
}

/// Greedy deletion over the instance's literals, least important first
/// according to `importance` (per feature); ties by feature, operator and
/// threshold. The result is irredundant with respect to the check.
pub fn sufficient_reason(model: &Model, x: &[f64], importance: &[f64]) -> Result<Rule> {
    let class = model.predict(x);
    let mut lits = instance_literals(model, x);
    lits.sort_by(|a, b| {
        importance[a.feature]
            .abs()
            .total_cmp(&importance[b.feature].abs())
            .then(a.feature.cmp(&b.feature))
            .then(a.op.cmp(&b.op))
            .then(a.value.total_cmp(&b.value))
    });
    let mut keep = vec![true; lits.len()];
    for i in 0..lits.len() {
        keep[i] = false;
        let trial: Vec<Literal> = lits.iter().zip(&keep).filter(|(_, &k)| k).map(|(l, _)| *l).collect();
        if !forced_class_check(model, &trial, class)? {
            keep[i] = true;
        }
    }
    let literals = lits.into_iter().zip(keep).filter(|(_, k)| *k).map(|(l, _)| l).collect();
    Ok(Rule { literals, class })
}

/// Every single-literal deletion breaks the check.
pub fn is_irredundant(model: &Model, rule: &Rule) -> Result<bool> {
    for i in 0..rule.literals.len() {
        let mut rest = rule.literals.clone();
        rest.remove(i);
        if forced_class_check(model, &rest, rule.class)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::seed;
    use crate::supervised::tree::{Node, Split};
    use crate::supervised::{train, Hyperparameters, TreeParams};
    use rand::Rng as _;

    fn tree_model(nodes: Vec<Node>, d: usize) -> Model {
        Model {
            feature_names: (0..d).map(|j| format!("x{j}")).collect(),
            n_classes: 2,
            hyperparameters: Hyperparameters::DecisionTree(TreeParams::default()),
            domain: vec![[0.0, 1.0]; d],
            estimator: Estimator::DecisionTree(DecisionTree { n_classes: 2, nodes }),
        }
    }

    fn leaf(c: usize) -> Node {
        let mut counts = vec![0, 0];
        counts[c] = 1;
        Node { counts, split: None }
    }

    fn split(feature: usize, threshold: f64, left: usize, right: usize) -> Node {
        Node { counts: vec![1, 1], split: Some(Split { feature, threshold, left, right }) }
    }

    #[test]
    fn interval_ops() {
        let i = Interval::REAL.at_most(1.0).above(0.0);
        assert!(!i.contains(0.0) && i.contains(1.0) && i.contains(0.5));
        assert!(Interval::REAL.above(1.0).at_most(1.0).is_empty());
        assert!(Interval::closed(2.0, 2.0).contains(2.0));
        assert!(Interval::closed(0.0, 1.0).apply(&Literal { feature: 0, op: Op::Eq, value: 3.0 }).is_empty());
    }

    #[test]
    fn constant_model_gives_empty_rule() {
        let m = tree_model(vec![leaf(1)], 2);
        let r = sufficient_reason(&m, &[0.3, 0.7], &[0.0, 0.0]).unwrap();
        assert!(r.literals.is_empty());
        assert_eq!(r.class, 1);
    }

    #[test]
    fn stump_rule() {
        let m = tree_model(vec![split(1, 0.5, 1, 2), leaf(0), leaf(1)], 2);
        let r = sufficient_reason(&m, &[0.9, 0.2], &[0.0, 1.0]).unwrap();
        assert_eq!(r.literals, vec![Literal { feature: 1, op: Op::Le, value: 0.5 }]);
        assert!(!forced_class_check(&m, &[], 0).unwrap());
    }

    #[test]
    fn full_instance_forces_prediction() {
        let m = tree_model(vec![split(0, 0.5, 1, 2), leaf(0), split(1, 0.3, 3, 4), leaf(1), leaf(0)], 2);
        for x in [[0.1, 0.9], [0.9, 0.1], [0.9, 0.9]] {
            let lits = instance_literals(&m, &x);
            let p = m.predict(&x);
            assert!(forced_class_check(&m, &lits, p).unwrap());
            assert!(!forced_class_check(&m, &lits, 1 - p).unwrap());
        }
    }

    #[test]
    fn inconsistent_literals_error() {
        let m = tree_model(vec![leaf(0)], 1);
        let lits = [Literal { feature: 0, op: Op::Le, value: 0.0 }, Literal { feature: 0, op: Op::Gt, value: 1.0 }];
        assert!(forced_class_check(&m, &lits, 0).is_err());
    }

    /// Smallest subset of the instance literals passing the check.
    fn minimum_size(m: &Model, lits: &[Literal], cls: usize) -> usize {
        let n = lits.len();
        (0u32..1 << n)
            .filter(|mask| {
                let sub: Vec<Literal> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| lits[i]).collect();
                forced_class_check(m, &sub, cls).unwrap()
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn redundant_path_condition_is_dropped() {
        // x0 ≤ 0.5 then x0 ≤ 0.8 again (redundant), then x1 ≤ 0.5
        let m = tree_model(
            vec![split(0, 0.5, 1, 2), split(0, 0.8, 3, 4), leaf(1), split(1, 0.5, 5, 6), leaf(1), leaf(0), leaf(1)],
            2,
        );
        let x = [0.2, 0.1];
        let r = sufficient_reason(&m, &x, &[0.0, 0.0]).unwrap();
        assert_eq!(r.literals.len(), minimum_size(&m, &instance_literals(&m, &x), 0));
        assert_eq!(r.literals.len(), 2);
        assert!(is_irredundant(&m, &r).unwrap());
    }

    #[test]
    fn greedy_is_irredundant_and_sound_on_random_trees() {
        let mut rng = seed::rng(8);
        for t in 0..30 {
            let x = Matrix::from_vec(40, 3, (0..120).map(|_| rng.random_range(0..4) as f64).collect());
            let y: Vec<usize> = (0..40).map(|i| usize::from(x.get(i, 0) + x.get(i, 1) * (x.get(i, 2) - 1.5) > 2.0)).collect();
            if y.iter().all(|&c| c == y[0]) {
                continue;
            }
            let hp = Hyperparameters::DecisionTree(TreeParams { max_depth: Some(4), ..Default::default() });
            let m = train(&hp, &x, &y, 2, &["a".into(), "b".into(), "c".into()], t).unwrap();
            for i in 0..10 {
                let xi = x.row(i);
                let r = sufficient_reason(&m, xi, &[0.0, 0.0, 0.0]).unwrap();
                assert!(r.holds(xi));
                assert!(forced_class_check(&m, &r.literals, r.class).unwrap());
                assert!(is_irredundant(&m, &r).unwrap());
                let full = instance_literals(&m, xi);
                if full.len() <= 8 {
                    assert!(r.literals.len() >= minimum_size(&m, &full, r.class));
                }
                // exhaustive completion over the 4^3 grid shifted into every cell
                for a in 0..5 {
                    for b in 0..5 {
                        for c in 0..5 {
                            let z = [a as f64 - 0.5, b as f64 - 0.5, c as f64 - 0.5];
                            let mut w = z;
                            for l in &r.literals {
                                if !l.holds(&w) {
                                    w[l.feature] = xi[l.feature];
                                }
                            }
                            if r.holds(&w) {
                                assert_eq!(m.predict(&w), r.class);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn logistic_equalities_respect_domain() {
        let x = Matrix::from_rows(&(0..20).map(|i| vec![i as f64 / 19.0, ((i * 7) % 20) as f64 / 19.0]).collect::<Vec<_>>());
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let m = train(&Hyperparameters::LogisticRegression { l2: 0.01 }, &x, &y, 2, &["a".into(), "b".into()], 0).unwrap();
        let xi = x.row(0);
        let r = sufficient_reason(&m, xi, &[1.0, 0.1]).unwrap();
        assert!(r.literals.iter().all(|l| l.op == Op::Eq));
        assert!(forced_class_check(&m, &r.literals, r.class).unwrap());
        assert!(is_irredundant(&m, &r).unwrap());
        assert!(r.literals.iter().any(|l| l.feature == 0));
    }
}
