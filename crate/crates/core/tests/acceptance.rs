//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; the process fails if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng as _;
use rand_distr::StandardNormal;

use clusterscope::boundary::{KdTree, Neighbor};
use clusterscope::data::{Cell, ClinicalBands, ColumnSchema, Dataset};
use clusterscope::linalg::Matrix;
use clusterscope::pipeline::{self, RunConfig, RunReport, Stage};
use clusterscope::seed::{self, Rng};
use clusterscope::stats::{self, StatsOptions, TestKind};
use clusterscope::supervised::{
    self, tree, EvalEntry, ForestParams, Hyperparameters, Model, ModelKind, TreeParams,
};
use clusterscope::xai::{self, shap::tree_shap_values, Op, Rule};
use clusterscope::Direction;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- quadrature

/// Tanh-sinh quadrature on [a, b]. Nodes are placed by their distance to `a`
/// so an integrable singularity at the left end is never evaluated.
fn tanh_sinh(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = 1.0 / 128.0;
    let half = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    let mut k: i64 = -(6.0 / h) as i64;
    while (k as f64) * h <= 6.0 {
        let t = k as f64 * h;
        let u = half * t.sinh();
        let w = half * t.cosh() / u.cosh().powi(2);
        let from_a = (b - a) / (1.0 + (-2.0 * u).exp());
        let from_b = (b - a) / (1.0 + (2.0 * u).exp());
        if w.is_finite() && w > 0.0 && from_a > 0.0 && from_b > 0.0 {
            let x = if from_a < from_b { a + from_a } else { b - from_b };
            sum += w * f(x);
        }
        k += 1;
    }
    sum * (b - a) / 2.0 * h
}

/// Two-sided Student tail by integrating the density after t = sqrt(v) tan(theta).
fn oracle_t_two_sided(t: f64, v: f64) -> f64 {
    let theta0 = (t.abs() / v.sqrt()).atan();
    let g = |s: f64| s.sin().powf(v - 1.0);
    let half = std::f64::consts::FRAC_PI_2;
    tanh_sinh(&g, 0.0, half - theta0) / tanh_sinh(&g, 0.0, half)
}

/// Chi-square survival function with u = sqrt(x): density ∝ u^(k-1) exp(-u²/2).
fn oracle_chi2_sf(x: f64, k: f64) -> f64 {
    let g = |u: f64| u.powf(k - 1.0) * (-0.5 * u * u).exp();
    let top = x.sqrt() + 60.0;
    tanh_sinh(&g, x.sqrt(), top) / tanh_sinh(&g, 0.0, top)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

// --------------------------------------------------------------- criterion 1

fn criterion_1() -> Check {
    let start = Instant::now();
    // the oracles themselves, at tabulated 95% quantiles
    ensure((oracle_t_two_sided(2.228138851986274, 10.0) - 0.05).abs() < 1e-12, "t oracle off at the 0.975 quantile")?;
    ensure((oracle_chi2_sf(3.841458820694124, 1.0) - 0.05).abs() < 1e-12, "chi2 oracle off at the 0.95 quantile")?;
    ensure((oracle_chi2_sf(11.070497693516351, 5.0) - 0.05).abs() < 1e-12, "chi2 oracle off at the 0.95 quantile")?;
    let mut rng = seed::rng(101);
    let mut worst_t: f64 = 0.0;
    let mut kinds = [0usize; 2];
    for case in 0..50 {
        let n1 = rng.random_range(3..30);
        let n2 = rng.random_range(3..30);
        let s = if case % 2 == 0 { 1.0 } else { rng.random_range(0.2..5.0) };
        let shift = rng.random_range(-1.5..1.5);
        let a: Vec<f64> = (0..n1).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..n2).map(|_| shift + s * rng.sample::<f64, _>(StandardNormal)).collect();
        let kind = stats::choose_t_test(&a, &b).map_err(|e| e.to_string())?;
        let got = stats::t_test(&a, &b, kind).map_err(|e| e.to_string())?;
        let (m1, m2, v1, v2) = (mean(&a), mean(&b), var(&a), var(&b));
        let (f1, f2) = (n1 as f64, n2 as f64);
        let (t, dof) = match kind {
            TestKind::Student => {
                kinds[0] += 1;
                let sp = ((f1 - 1.0) * v1 + (f2 - 1.0) * v2) / (f1 + f2 - 2.0);
                ((m2 - m1) / (sp * (1.0 / f1 + 1.0 / f2)).sqrt(), f1 + f2 - 2.0)
            }
            TestKind::Welch => {
                kinds[1] += 1;
                let (q1, q2) = (v1 / f1, v2 / f2);
                let dof = (q1 + q2).powi(2) / (q1 * q1 / (f1 - 1.0) + q2 * q2 / (f2 - 1.0));
                ((m2 - m1) / (q1 + q2).sqrt(), dof)
            }
            other => return Err(format!("unexpected test {other:?}")),
        };
        ensure((got.statistic - t).abs() < 1e-9 * t.abs().max(1.0), format!("case {case}: statistic {} vs {t}", got.statistic))?;
        let p = oracle_t_two_sided(t, dof);
        worst_t = worst_t.max((got.p_value - p).abs());
    }
    ensure(kinds[0] > 0 && kinds[1] > 0, "both t-test variants must be exercised")?;
    ensure(worst_t < 1e-8, format!("t-test p-value error {worst_t:.2e}"))?;

    let mut worst_c: f64 = 0.0;
    let mut cases = 0;
    while cases < 50 {
        let r = rng.random_range(2..4usize);
        let c = rng.random_range(2..6usize);
        let base = rng.random_range(5..40u64);
        let table: Vec<Vec<u64>> = (0..r).map(|_| (0..c).map(|_| base + rng.random_range(0..40u64)).collect()).collect();
        let got = stats::categorical_test(&table).map_err(|e| e.to_string())?;
        if got.test_used != TestKind::Chi2 {
            continue;
        }
        let n: f64 = table.iter().flatten().sum::<u64>() as f64;
        let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
        let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
        let mut x2 = 0.0;
        for i in 0..r {
            for j in 0..c {
                let e = rows[i] * cols[j] / n;
                x2 += (table[i][j] as f64 - e).powi(2) / e;
            }
        }
        let dof = ((r - 1) * (c - 1)) as f64;
        ensure((got.statistic - x2).abs() < 1e-9 * x2.max(1.0), format!("chi2 statistic {} vs {x2}", got.statistic))?;
        worst_c = worst_c.max((got.p_value - oracle_chi2_sf(x2, dof)).abs());
        cases += 1;
    }
    ensure(worst_c < 1e-8, format!("chi-square p-value error {worst_c:.2e}"))?;

    // exact hypergeometric enumeration in integers
    let mut pascal = vec![vec![0u128; 41]; 41];
    for n in 0..=40 {
        pascal[n][0] = 1;
        for k in 1..=n {
            pascal[n][k] = pascal[n - 1][k - 1] + if k < n { pascal[n - 1][k] } else { 0 };
        }
    }
    let mut worst_f: f64 = 0.0;
    let mut tables = 0usize;
    for n in 1..=40usize {
        for a in 0..=n {
            for b in 0..=n - a {
                for c in 0..=n - a - b {
                    let d = n - a - b - c;
                    let (r1, c1) = (a + b, a + c);
                    let w = |x: usize| pascal[c1][x] * pascal[n - c1][r1 - x];
                    let obs = w(a);
                    let lo = (r1 + c1).saturating_sub(n);
                    let num: u128 = (lo..=r1.min(c1)).map(w).filter(|&v| v <= obs).sum();
                    let p = num as f64 / pascal[n][r1] as f64;
                    let got = stats::fisher_exact([[a as u64, b as u64], [c as u64, d as u64]]).map_err(|e| e.to_string())?;
                    worst_f = worst_f.max((got - p).abs());
                    tables += 1;
                }
            }
        }
    }
    ensure(worst_f < 1e-12, format!("Fisher error {worst_f:.2e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!(
        "t max err {worst_t:.1e} ({} Student, {} Welch), chi2 max err {worst_c:.1e}, Fisher max err {worst_f:.1e} over {tables} tables, {:.2}s",
        kinds[0],
        kinds[1],
        elapsed.as_secs_f64()
    ))
}

// --------------------------------------------------------------- criterion 2

fn criterion_2() -> Check {
    let (trials, n, d) = (1000, 40, 10);
    let schema: Vec<ColumnSchema> = (0..d).map(|j| ColumnSchema::numeric(&format!("x{j}"))).collect();
    let opts = StatsOptions { alpha: 0.05, bonferroni: false };
    let bands = ClinicalBands::default();
    let mut rng = seed::rng(202);
    let mut hits = 0usize;
    for _ in 0..trials {
        let rows: Vec<Vec<Option<Cell>>> =
            (0..n).map(|_| (0..d).map(|_| Some(Cell::Number(rng.sample(StandardNormal)))).collect()).collect();
        let labels: Vec<usize> = loop {
            let l: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
            if (0..2).all(|c| l.iter().filter(|&&x| x == c).count() >= 2) {
                break l;
            }
        };
        let ds = Dataset::new(schema.clone(), rows, (0..n).map(|i| i.to_string()).collect()).map_err(|e| e.to_string())?;
        let p = stats::characterize_by_tests(&ds, &labels, &opts, &bands).map_err(|e| e.to_string())?;
        hits += p.significant.len();
    }
    let rate = hits as f64 / (trials * d) as f64;
    ensure((0.03..=0.07).contains(&rate), format!("rejection rate {rate:.4}"))?;
    Ok(format!("rejection rate {rate:.4} over {} tests", trials * d))
}

// --------------------------------------------------------------- criterion 3

fn leaf_of(t: &tree::DecisionTree, x: &[f64]) -> usize {
    let mut i = 0;
    while let Some(s) = t.nodes[i].split {
        i = if x[s.feature] <= s.threshold { s.left } else { s.right };
    }
    i
}

/// Exact Shapley values of the interventional game v(S) = E_b f(x_S, b_rest).
fn shapley_oracle(f: &dyn Fn(&[f64]) -> f64, x: &[f64], bg: &Matrix) -> (f64, Vec<f64>) {
    let d = x.len();
    let v = |mask: usize| {
        (0..bg.rows())
            .map(|r| {
                let z: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { x[j] } else { bg.get(r, j) }).collect();
                f(&z)
            })
            .sum::<f64>()
            / bg.rows() as f64
    };
    let vals: Vec<f64> = (0..1usize << d).map(v).collect();
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        for mask in 0..1usize << d {
            if mask >> i & 1 == 0 {
                let s = mask.count_ones() as usize;
                *p += fact(s) * fact(d - s - 1) / fact(d) * (vals[mask | 1 << i] - vals[mask]);
            }
        }
    }
    (vals[0], phi)
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut rng = seed::rng(303);
    let mut worst: f64 = 0.0;
    let mut max_depth_seen = 0;
    for case in 0..100 {
        let d = rng.random_range(1..=6usize);
        let n = rng.random_range(8..40usize);
        let classes = rng.random_range(2..=3usize);
        let grid = case % 2 == 0;
        let draw = |rng: &mut Rng| if grid { rng.random_range(0..4) as f64 } else { rng.sample(StandardNormal) };
        let x = Matrix::from_rows(&(0..n).map(|_| (0..d).map(|_| draw(&mut rng)).collect()).collect::<Vec<_>>());
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let params = TreeParams { max_depth: Some(rng.random_range(1..=3)), ..Default::default() };
        let idx: Vec<usize> = (0..n).collect();
        let t = tree::fit(&x, &y, classes, &idx, &params, &mut rng);
        max_depth_seen = max_depth_seen.max(t.depth());
        let nb = rng.random_range(1..=8usize);
        let bg = Matrix::from_rows(&(0..nb).map(|_| (0..d).map(|_| draw(&mut rng)).collect()).collect::<Vec<_>>());
        let q: Vec<f64> = (0..d).map(|_| draw(&mut rng)).collect();
        let cls = rng.random_range(0..classes);
        let value = |leaf: usize| {
            let c = &t.nodes[leaf].counts;
            c[cls] as f64 / c.iter().sum::<u32>() as f64
        };
        let (base, phi) = tree_shap_values(&t, &value, &q, &bg).map_err(|e| e.to_string())?;
        let f = |z: &[f64]| value(leaf_of(&t, z));
        let (obase, ophi) = shapley_oracle(&f, &q, &bg);
        worst = worst.max((base - obase).abs());
        for (a, b) in phi.iter().zip(&ophi) {
            worst = worst.max((a - b).abs());
        }
        let gap = (base + phi.iter().sum::<f64>() - f(&q)).abs();
        ensure(gap < 1e-9, format!("case {case}: local accuracy gap {gap:.2e}"))?;
    }
    ensure(worst < 1e-9, format!("max deviation from brute force {worst:.2e}"))?;
    ensure(max_depth_seen >= 3, "no depth-3 tree was generated")?;

    // local accuracy on attributions emitted for all three model kinds
    let mut emitted = 0;
    for (model, x) in discretized_models(3)? {
        let bg = x.clone();
        for i in 0..x.rows() {
            let cls = model.predict(x.row(i));
            let att = xai::shap(&model, &i.to_string(), x.row(i), &bg, cls).map_err(|e| e.to_string())?;
            ensure(att.local_accuracy_gap() < 1e-9, format!("{} attribution gap {:.2e}", model.kind(), att.local_accuracy_gap()))?;
            emitted += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("max deviation {worst:.1e} on 100 trees; {emitted} model attributions locally accurate; {:.2}s", elapsed.as_secs_f64()))
}

// --------------------------------------------------------------- criterion 4

/// Small models on integer-valued features in 0..=4, one per kind.
fn discretized_models(seed_base: u64) -> Result<Vec<(Model, Matrix)>, String> {
    let mut rng = seed::rng(seed_base);
    let (n, d, classes) = (36, 4, 3);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0..=4) as f64).collect()).collect();
    let y: Vec<usize> = rows.iter().map(|r| ((r[0] + r[1] + (r[2] > 2.0) as u8 as f64) as usize) % classes).collect();
    let x = Matrix::from_rows(&rows);
    let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    let hps = [
        Hyperparameters::LogisticRegression { l2: 0.1 },
        Hyperparameters::DecisionTree(TreeParams { max_depth: Some(4), ..Default::default() }),
        Hyperparameters::RandomForest(ForestParams { n_trees: 15, max_depth: Some(4), ..Default::default() }),
    ];
    hps.iter()
        .map(|hp| {
            supervised::train(hp, &x, &y, classes, &names, seed_base).map(|m| (m, x.clone())).map_err(|e| e.to_string())
        })
        .collect()
}

/// Draws a completion of `rule`: literal features respect their literals,
/// free features range over the model's domain (an integer grid widened by
/// one step, mixed with reals, when the domain is unbounded).
fn completion(model: &Model, rule: &Rule, rng: &mut Rng) -> Vec<f64> {
    let d = model.feature_names.len();
    (0..d)
        .map(|j| {
            let lits: Vec<_> = rule.literals.iter().filter(|l| l.feature == j).collect();
            if let Some(eq) = lits.iter().find(|l| l.op == Op::Eq) {
                return eq.value;
            }
            let bounded = matches!(model.estimator, supervised::Estimator::LogisticRegression(_));
            loop {
                let v = if bounded {
                    let [lo, hi] = model.domain[j];
                    if rng.random_bool(0.5) {
                        rng.random_range(lo..=hi).round().clamp(lo, hi)
                    } else {
                        rng.random_range(lo..=hi)
                    }
                } else if rng.random_bool(0.5) {
                    rng.random_range(-1..=5) as f64
                } else {
                    rng.random_range(-1.5..5.5)
                };
                if lits.iter().all(|l| l.holds_value(v)) {
                    return v;
                }
            }
        })
        .collect()
}

trait HoldsValue {
    fn holds_value(&self, v: f64) -> bool;
}

impl HoldsValue for xai::Literal {
    fn holds_value(&self, v: f64) -> bool {
        match self.op {
            Op::Le => v <= self.value,
            Op::Gt => v > self.value,
            Op::Eq => v == self.value,
        }
    }
}

fn criterion_4(report: &RunReport, out: &Path) -> Check {
    let start = Instant::now();
    let model = Model::load(&out.join(pipeline::MODEL)).map_err(|e| e.to_string())?;
    let xai_section = report.xai.result().ok_or("xai section missing")?;
    for e in &xai_section.explanations {
        let rule = &e.short.formal_rule;
        ensure(xai::forced_class_check(&model, &rule.literals, rule.class).map_err(|e| e.to_string())?, format!("pipeline rule for {} is not sufficient", e.short.instance))?;
        ensure(xai::is_irredundant(&model, rule).map_err(|e| e.to_string())?, format!("pipeline rule for {} is redundant", e.short.instance))?;
    }

    let mut rng = seed::rng(404);
    let mut rules = 0;
    let mut lens = BTreeMap::new();
    for (model, x) in discretized_models(4)? {
        for i in (0..x.rows()).step_by(3) {
            let xi = x.row(i);
            let cls = model.predict(xi);
            let att = xai::shap(&model, &i.to_string(), xi, &x, cls).map_err(|e| e.to_string())?;
            let importance: Vec<f64> = att.phi.iter().map(|p| p.abs()).collect();
            let rule = xai::sufficient_reason(&model, xi, &importance).map_err(|e| e.to_string())?;
            ensure(rule.class == cls, "rule class differs from the prediction")?;
            ensure(rule.holds(xi), "rule does not hold on its instance")?;
            ensure(xai::forced_class_check(&model, &rule.literals, cls).map_err(|e| e.to_string())?, "rule fails the forced-class check")?;
            ensure(xai::is_irredundant(&model, &rule).map_err(|e| e.to_string())?, "rule is redundant")?;
            for _ in 0..10_000 {
                let z = completion(&model, &rule, &mut rng);
                if model.predict(&z) != cls {
                    return Err(format!("{} rule {:?} flipped on {z:?}", model.kind(), rule.literals));
                }
            }
            rules += 1;
            *lens.entry(model.kind().to_string()).or_insert(0) += rule.literals.len();
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} pipeline rules sound and irredundant; {rules} small-model rules held on 10^4 completions each (literals per kind {lens:?}); {:.2}s",
        xai_section.explanations.len(),
        elapsed.as_secs_f64()
    ))
}

// --------------------------------------------------------------- criterion 5

fn criterion_5() -> Check {
    let mut rng = seed::rng(505);
    let mut queries = 0;
    for ds in 0..20 {
        let n = rng.random_range(1..400usize);
        let d = rng.random_range(1..=6usize);
        let grid = ds % 3 == 0;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| if grid { rng.random_range(0..3) as f64 } else { rng.random_range(-10.0..10.0) }).collect())
            .collect();
        let pts = Matrix::from_rows(&rows);
        let tree = KdTree::build(&pts).map_err(|e| e.to_string())?;
        for q in 0..50 {
            let query: Vec<f64> = if q % 4 == 0 {
                rows[rng.random_range(0..n)].clone()
            } else {
                (0..d).map(|_| rng.random_range(-12.0..12.0)).collect()
            };
            let k = rng.random_range(1..=n.min(25));
            let got = tree.knn(&query, k).map_err(|e| e.to_string())?;
            let mut all: Vec<Neighbor> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| Neighbor { index: i, sq_dist: r.iter().zip(&query).map(|(a, b)| (a - b).powi(2)).sum() })
                .collect();
            all.sort_by(|a, b| a.sq_dist.total_cmp(&b.sq_dist).then(a.index.cmp(&b.index)));
            all.truncate(k);
            ensure(got == all, format!("dataset {ds} query {q}: kd-tree and scan differ"))?;
            queries += 1;
        }
    }
    Ok(format!("{queries} queries over 20 datasets identical to a linear scan"))
}

// --------------------------------------------------------------- pipeline runs

fn config(seed: u64, out: &Path, skip: Vec<Stage>) -> RunConfig {
    RunConfig { seed, out: out.to_path_buf(), skip, ..RunConfig::default() }
}

fn criterion_6(dir: &Path) -> Check {
    let skip = vec![Stage::Stats, Stage::Pattern, Stage::Train, Stage::Boundary, Stage::Xai];
    let mut ks = Vec::new();
    let mut sils = Vec::new();
    for s in 0..10 {
        let out = dir.join(format!("seed{s}"));
        let report = pipeline::run(&config(s, &out, skip.clone())).map_err(|e| e.to_string())?;
        ks.push(report.clustering.k);
        sils.push(report.clustering.silhouette.ok_or("no silhouette")?);
    }
    let twos = ks.iter().filter(|&&k| k == 2).count();
    ensure(twos >= 9, format!("K = 2 in only {twos}/10 seeds: {ks:?}"))?;
    let low: Vec<_> = sils.iter().filter(|&&s| s <= 0.25).collect();
    ensure(low.is_empty(), format!("silhouette ≤ 0.25: {low:?}"))?;
    let avg = sils.iter().sum::<f64>() / 10.0;
    let min = sils.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("K = 2 in {twos}/10 seeds; silhouette mean {avg:.3}, min {min:.3}"))
}

fn is_dep_anx(name: &str) -> bool {
    name.starts_with("DEP") || name.starts_with("ANX")
}

fn criterion_7(report: &RunReport, out: &Path) -> Check {
    let st = report.stats.result().ok_or("stats section missing")?;
    let young = st.clusters.iter().find_map(|c| {
        c.features.iter().find(|f| f.feature == "AGE" && f.direction == Some(Direction::Low)).map(|_| c.cluster)
    });
    let young = young.ok_or("AGE is not flagged low in any cluster")?;
    let findings = &st.clusters[young].features;
    for (feat, dir) in [("DEPV0", Direction::High), ("ANXV0", Direction::High), ("ISIV0", Direction::High), ("AGE", Direction::Low)] {
        let f = findings.iter().find(|f| f.feature == feat).ok_or(format!("(a) {feat} not significant"))?;
        ensure(f.direction == Some(dir), format!("(a) {feat} has direction {:?}", f.direction))?;
    }

    let pat = report.pattern.result().ok_or("pattern section missing")?;
    let rep = pat.clusters.iter().find(|c| c.cluster_id == young).ok_or("(b) no pattern report for the cluster")?;
    let high: Vec<&str> = rep.high().map(|s| s.feature.as_str()).collect();
    let low: Vec<&str> = rep.low().map(|s| s.feature.as_str()).collect();
    ensure(high.iter().any(|f| f.starts_with("DEP")), format!("(b) no DEP feature high: {high:?}"))?;
    ensure(high.iter().any(|f| f.starts_with("ANX")), format!("(b) no ANX feature high: {high:?}"))?;
    ensure(!low.iter().any(|f| is_dep_anx(f)), format!("(b) DEP/ANX feature low: {low:?}"))?;
    ensure(low.contains(&"AGE"), format!("(b) AGE not low: {low:?}"))?;

    let model = Model::load(&out.join(pipeline::MODEL)).map_err(|e| e.to_string())?;
    let ex = report.xai.result().ok_or("xai section missing")?;
    let mine: Vec<_> = ex.explanations.iter().filter(|e| e.cluster == young).collect();
    ensure(!mine.is_empty(), "(c) no boundary explanation for the cluster")?;
    let with = mine
        .iter()
        .filter(|e| e.short.intersected_rule.literals.iter().any(|l| is_dep_anx(&model.feature_names[l.feature])))
        .count();
    let share = with as f64 / mine.len() as f64;
    ensure(share >= 0.70, format!("(c) only {with}/{} explanations mention DEP/ANX", mine.len()))?;
    Ok(format!(
        "young cluster {young}: (a) ok, (b) high {high:?} low {low:?}, (c) {with}/{} explanations mention DEP/ANX",
        mine.len()
    ))
}

fn better(a: &EvalEntry, b: &EvalEntry) -> bool {
    (a.accuracy, a.macro_f1) > (b.accuracy, b.macro_f1)
}

fn criterion_8(report: &RunReport) -> Check {
    let cmp = report.models.result().ok_or("models section missing")?;
    let sel = cmp.entries.iter().find(|e| e.kind == cmp.selected).ok_or("selected model has no entry")?;
    ensure(sel.accuracy >= 0.90, format!("selected {} accuracy {:.4}", sel.kind, sel.accuracy))?;
    for e in &cmp.entries {
        ensure(!better(e, sel), format!("{} beats the selected {}", e.kind, sel.kind))?;
    }

    let mut rng = seed::rng(808);
    for _ in 0..2000 {
        let n = rng.random_range(1..=6usize);
        let entries: Vec<EvalEntry> = (0..n)
            .map(|i| {
                let mut e = supervised::metrics(&[0, 1], &[0, 1], 2);
                e.kind = ModelKind::ALL[i % 3];
                e.accuracy = rng.random_range(0..4) as f64 / 4.0;
                e.macro_f1 = rng.random_range(0..4) as f64 / 4.0;
                e
            })
            .collect();
        let i = supervised::select_best(&entries).ok_or("select_best returned nothing")?;
        ensure(!entries.iter().any(|e| better(e, &entries[i])), "select_best picked a dominated entry")?;
    }
    let accs: Vec<String> = cmp.entries.iter().map(|e| format!("{}={:.4}", e.kind, e.accuracy)).collect();
    Ok(format!("selected {} ({:.4}); {}; select_best never dominated on 2000 random tables", sel.kind, sel.accuracy, accs.join(", ")))
}

fn cli_run(out: &Path, threads: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_clusterscope"))
        .args(["run", "--synth", "default", "--seed", "42", "--out"])
        .arg(out)
        .env("RAYON_NUM_THREADS", threads)
        .env_remove("CLUSTERSCOPE_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), format!("run failed: {}", String::from_utf8_lossy(&status.stderr)))
}

fn criterion_9(dir: &Path) -> Check {
    let (a, b) = (dir.join("a"), dir.join("b"));
    cli_run(&a, "1")?;
    cli_run(&b, "4")?;
    let mut same = 0;
    for entry in std::fs::read_dir(&a).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let x = std::fs::read(a.join(&name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(&name)).map_err(|e| e.to_string())?;
        ensure(x == y, format!("{} differs between runs", name.to_string_lossy()))?;
        same += 1;
    }
    ensure(b.join(pipeline::REPORT_JSON).exists(), "report.json missing")?;
    Ok(format!("report.json and {} other artifacts byte-identical across two runs (1 and 4 threads)", same - 1))
}

fn criterion_10(report: &RunReport) -> Check {
    ensure(report.consistency.consistent(), format!("conflicts: {:?}", report.consistency.conflicts))?;
    // recheck from the sections themselves
    let mut seen: BTreeMap<(usize, String), Vec<(Direction, &str)>> = BTreeMap::new();
    if let Some(st) = report.stats.result() {
        for c in &st.clusters {
            for f in &c.features {
                if let Some(d) = f.direction {
                    seen.entry((c.cluster, f.feature.clone())).or_default().push((d, "stats"));
                }
            }
        }
    }
    if let Some(p) = report.pattern.result() {
        for c in &p.clusters {
            for s in &c.salient {
                seen.entry((c.cluster_id, s.feature.clone())).or_default().push((s.direction, "pattern"));
            }
        }
    }
    if let Some(x) = report.xai.result() {
        for c in &x.clusters {
            for f in &c.frequency {
                if let Some(d) = f.direction {
                    seen.entry((c.cluster, f.feature.clone())).or_default().push((d, "xai"));
                }
            }
        }
    }
    let mut multi = 0;
    for ((cluster, feature), dirs) in &seen {
        let first = dirs[0].0;
        ensure(dirs.iter().all(|d| d.0 == first), format!("cluster {cluster} feature {feature}: {dirs:?}"))?;
        if dirs.len() > 1 {
            multi += 1;
        }
    }
    ensure(report.stats.result().is_some() && report.pattern.result().is_some() && report.xai.result().is_some(), "a section was skipped")?;
    Ok(format!("no contradiction; {multi} (cluster, feature) pairs backed by several methods"))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let default_out = dir.path().join("default");
    let default_report = pipeline::run(&config(42, &default_out, vec![]));

    let with_report = |f: &dyn Fn(&RunReport) -> Check| -> Check {
        match &default_report {
            Ok(r) => f(r),
            Err(e) => Err(format!("default run failed: {e}")),
        }
    };

    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("1 statistical engine exactness", Box::new(criterion_1)),
        ("2 null calibration", Box::new(criterion_2)),
        ("3 SHAP exactness", Box::new(criterion_3)),
        ("4 formal-rule soundness", Box::new(|| with_report(&|r| criterion_4(r, &default_out)))),
        ("5 KD-tree exactness", Box::new(criterion_5)),
        ("6 clustering sanity", Box::new(|| criterion_6(&dir.path().join("c6")))),
        ("7 pattern reproduction", Box::new(|| with_report(&|r| criterion_7(r, &default_out)))),
        ("8 model table", Box::new(|| with_report(&criterion_8))),
        ("9 determinism", Box::new(|| criterion_9(&dir.path().join("c9")))),
        ("10 cross-method consistency", Box::new(|| with_report(&criterion_10))),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

