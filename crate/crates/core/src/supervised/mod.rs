//! Classifiers that predict cluster labels: split, train, evaluate, select.

pub mod forest;
pub mod logistic;
pub mod tree;

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed;

pub use forest::{ForestParams, RandomForest};
pub use logistic::LogisticModel;
pub use tree::{DecisionTree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

/// Shuffled split with `round(fraction·n_c)` training rows per class.
pub fn split(labels: &[usize], fraction: f64, seed: u64, stratified: bool) -> Result<LabeledSplit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("train fraction must be in (0, 1], got {fraction}")));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![vec![]; k];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    for (c, g) in groups.iter().enumerate() {
        if g.len() == 1 {
            return Err(Error::invalid(format!("class {c} has a single member")));
        }
    }
    let mut rng = seed::rng(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let mut take = |mut g: Vec<usize>| {
        g.shuffle(&mut rng);
        let n_train = ((fraction * g.len() as f64).round() as usize).clamp(1.min(g.len()), g.len());
        train.extend_from_slice(&g[..n_train]);
        test.extend_from_slice(&g[n_train..]);
    };
    if stratified {
        groups.into_iter().filter(|g| !g.is_empty()).for_each(&mut take);
    } else {
        take((0..labels.len()).collect());
    }
    if test.is_empty() {
        return Err(Error::invalid("split leaves an empty test set"));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(LabeledSplit { train, test, fraction, seed, stratified })
}

/// Declaration order is the tie-break order in [`select_best`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogisticRegression,
    DecisionTree,
    RandomForest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::LogisticRegression, ModelKind::DecisionTree, ModelKind::RandomForest];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "Régression logistique",
            ModelKind::DecisionTree => "Arbre de décision",
            ModelKind::RandomForest => "Forêt aléatoire",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparameters {
    LogisticRegression { l2: f64 },
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
}

impl Hyperparameters {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparameters::LogisticRegression { .. } => ModelKind::LogisticRegression,
            Hyperparameters::DecisionTree(_) => ModelKind::DecisionTree,
            Hyperparameters::RandomForest(_) => ModelKind::RandomForest,
        }
    }
}

pub fn default_grid(kind: ModelKind) -> Vec<Hyperparameters> {
    let depths = [Some(3), Some(5), Some(8), None];
    match kind {
        ModelKind::LogisticRegression => {
            [0.01, 0.1, 1.0].into_iter().map(|l2| Hyperparameters::LogisticRegression { l2 }).collect()
        }
        ModelKind::DecisionTree => depths
            .into_iter()
            .flat_map(|max_depth| {
                [1, 3, 5].into_iter().map(move |min_samples_leaf| {
                    Hyperparameters::DecisionTree(TreeParams { max_depth, min_samples_leaf, max_features: None })
                })
            })
            .collect(),
        ModelKind::RandomForest => [50, 100]
            .into_iter()
            .flat_map(|n_trees| {
                [Some(5), Some(8), None].into_iter().map(move |max_depth| {
                    Hyperparameters::RandomForest(ForestParams { n_trees, max_depth, ..Default::default() })
                })
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    LogisticRegression(LogisticModel),
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub feature_names: Vec<String>,
    pub n_classes: usize,
    pub hyperparameters: Hyperparameters,
    /// Per-feature `[min, max]`: the training rows after [`train`], the whole
    /// cohort after [`compare_models`].
    pub domain: Vec<[f64; 2]>,
    pub estimator: Estimator,
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        self.hyperparameters.kind()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        match &self.estimator {
            Estimator::LogisticRegression(m) => argmax_f64(&m.logits(x)),
            Estimator::DecisionTree(t) => t.predict(x),
            Estimator::RandomForest(f) => f.predict(x),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        match &self.estimator {
            Estimator::LogisticRegression(m) => m.predict_proba(x),
            Estimator::DecisionTree(t) => t.predict_proba(x),
            Estimator::RandomForest(f) => f.predict_proba(x),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Per-column `[min, max]`.
pub fn column_ranges(x: &Matrix) -> Vec<[f64; 2]> {
    (0..x.cols())
        .map(|j| {
            let col = x.column(j);
            [col.iter().copied().fold(f64::INFINITY, f64::min), col.iter().copied().fold(f64::NEG_INFINITY, f64::max)]
        })
        .collect()
}

pub(crate) fn argmax_f64(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn train(
    hp: &Hyperparameters,
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    feature_names: &[String],
    seed: u64,
) -> Result<Model> {
    if x.rows() != y.len() {
        return Err(Error::invalid("label count differs from row count"));
    }
    if y.iter().any(|&c| c >= n_classes) {
        return Err(Error::invalid("label exceeds the number of classes"));
    }
    let first = y.first().ok_or_else(|| Error::invalid("empty training set"))?;
    if y.iter().all(|c| c == first) {
        return Err(Error::invalid("training set holds a single class"));
    }
    let all: Vec<usize> = (0..x.rows()).collect();
    let estimator = match hp {
        Hyperparameters::LogisticRegression { l2 } => Estimator::LogisticRegression(logistic::fit(x, y, n_classes, *l2)),
        Hyperparameters::DecisionTree(p) => {
            Estimator::DecisionTree(tree::fit(x, y, n_classes, &all, p, &mut seed::rng(seed)))
        }
        Hyperparameters::RandomForest(p) => Estimator::RandomForest(forest::fit(x, y, n_classes, p, seed)),
    };
    Ok(Model { feature_names: feature_names.to_vec(), n_classes, hyperparameters: *hp, domain: column_ranges(x), estimator })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub kind: ModelKind,
    pub hyperparameters: Hyperparameters,
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_f1: f64,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<u64>>,
}

pub fn evaluate(model: &Model, x: &Matrix, y: &[usize]) -> EvalEntry {
    let pred: Vec<usize> = x.iter_rows().map(|r| model.predict(r)).collect();
    let mut e = metrics(&pred, y, model.n_classes);
    e.kind = model.kind();
    e.hyperparameters = model.hyperparameters;
    e
}

/// Metrics of a prediction vector; kind and hyperparameters are placeholders.
pub fn metrics(pred: &[usize], truth: &[usize], n_classes: usize) -> EvalEntry {
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let total = truth.len().max(1) as f64;
    let correct: u64 = (0..n_classes).map(|c| confusion[c][c]).sum();
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut precision = Vec::new();
    let mut recall = Vec::new();
    let mut f1 = Vec::new();
    for c in 0..n_classes {
        let tp = confusion[c][c];
        let pc: u64 = (0..n_classes).map(|t| confusion[t][c]).sum();
        let tc: u64 = confusion[c].iter().sum();
        let (p, r) = (ratio(tp, pc), ratio(tp, tc));
        precision.push(p);
        recall.push(r);
        f1.push(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) });
    }
    let macro_f1 = f1.iter().sum::<f64>() / n_classes.max(1) as f64;
    EvalEntry {
        kind: ModelKind::LogisticRegression,
        hyperparameters: Hyperparameters::LogisticRegression { l2: 0.0 },
        accuracy: correct as f64 / total,
        precision,
        recall,
        f1,
        macro_f1,
        confusion,
    }
}

/// Index of the best entry by (accuracy, macro-F1) descending; exact ties go
/// to the earlier kind in [`ModelKind`] order, then to the earlier entry.
pub fn select_best(reports: &[EvalEntry]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in reports.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let o = &reports[b];
                (r.accuracy, r.macro_f1) > (o.accuracy, o.macro_f1)
                    || ((r.accuracy, r.macro_f1) == (o.accuracy, o.macro_f1) && r.kind < o.kind)
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Deterministic stratified fold assignment.
pub fn folds(labels: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..n_classes {
        let mut g: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        g.shuffle(&mut rng);
        for i in g {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: Hyperparameters,
    pub scores: Vec<(Hyperparameters, f64)>,
}

/// 5-fold cross-validated accuracy argmax; ties to the first grid point.
pub fn grid_tune(grid: &[Hyperparameters], x: &Matrix, y: &[usize], n_classes: usize, seed: u64) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let k = 5.min(x.rows());
    let fold = folds(y, k, seed::derive_named(seed, "cv"));
    let names: Vec<String> = (0..x.cols()).map(|j| format!("x{j}")).collect();
    let mut scores = Vec::with_capacity(grid.len());
    for hp in grid {
        let mut correct = 0usize;
        for f in 0..k {
            let tr: Vec<usize> = (0..y.len()).filter(|&i| fold[i] != f).collect();
            let te: Vec<usize> = (0..y.len()).filter(|&i| fold[i] == f).collect();
            let ytr: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
            let m = train(hp, &x.select_rows(&tr), &ytr, n_classes, &names, seed::derive(seed, f as u64))?;
            correct += te.iter().filter(|&&i| m.predict(x.row(i)) == y[i]).count();
        }
        scores.push((*hp, correct as f64 / y.len() as f64));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.1 > scores[best].1 {
            best = i;
        }
    }
    Ok(GridResult { best: scores[best].0, scores })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub split: LabeledSplit,
    pub entries: Vec<EvalEntry>,
    pub selected: ModelKind,
    pub note: String,
}

/// Tunes each kind on the training rows, refits it, evaluates on the test
/// rows and keeps the best model overall.
pub fn compare_models(
    x: &Matrix,
    labels: &[usize],
    feature_names: &[String],
    kinds: &[ModelKind],
    fraction: f64,
    seed: u64,
) -> Result<(ModelComparison, Model)> {
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let sp = split(labels, fraction, seed::derive_named(seed, "split"), true)?;
    let xtr = x.select_rows(&sp.train);
    let ytr: Vec<usize> = sp.train.iter().map(|&i| labels[i]).collect();
    let xte = x.select_rows(&sp.test);
    let yte: Vec<usize> = sp.test.iter().map(|&i| labels[i]).collect();
    let mut entries = Vec::new();
    let mut models = Vec::new();
    for &kind in kinds {
        let s = seed::derive_named(seed, &kind.to_string());
        let tuned = grid_tune(&default_grid(kind), &xtr, &ytr, n_classes, s)?;
        let mut m = train(&tuned.best, &xtr, &ytr, n_classes, feature_names, s)?;
        m.domain = column_ranges(x);
        entries.push(evaluate(&m, &xte, &yte));
        models.push(m);
    }
    let best = select_best(&entries).ok_or_else(|| Error::invalid("no model kind requested"))?;
    let comparison = ModelComparison {
        split: sp,
        selected: entries[best].kind,
        entries,
        note: "one model is selected for all clusters".into(),
    };
    Ok((comparison, models.swap_remove(best)))
}

impl ModelComparison {
    pub fn to_markdown(&self) -> String {
        let k = self.entries.first().map_or(0, |e| e.f1.len());
        let mut s = String::from("| Modèle | Accuracy |");
        for c in 0..k {
            s.push_str(&format!(" F1 (C{c}) |"));
        }
        s.push_str("\n|---|---|");
        s.push_str(&"---|".repeat(k));
        s.push('\n');
        for e in &self.entries {
            let mark = if e.kind == self.selected { " **(retenu)**" } else { "" };
            s.push_str(&format!("| {}{} | {:.2}% |", e.kind.label(), mark, 100.0 * e.accuracy));
            for f in &e.f1 {
                s.push_str(&format!(" {:.2}% |", 100.0 * f));
            }
            s.push('\n');
        }
        s.push_str(&format!(
            "\nTrain/test split {}/{} (stratified); {}.\n",
            self.split.train.len(),
            self.split.test.len(),
            self.note
        ));
        s
    }
}
