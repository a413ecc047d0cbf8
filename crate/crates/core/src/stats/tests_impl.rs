use serde::{Deserialize, Serialize};

use super::special::{chi_square_sf, log_gamma, student_t_two_sided};
use crate::error::{Error, Result};
use crate::linalg::{mean, variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Student,
    Welch,
    Chi2,
    Fisher,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub feature: String,
    pub test_used: TestKind,
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
    /// Per-cluster mean and sample std, numeric features only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mean_per_cluster: Vec<MeanStd>,
    /// Contingency table (clusters x categories), categorical features only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counts: Vec<Vec<u64>>,
    /// Cluster 1 mean minus cluster 0 mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difference: Option<f64>,
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestResult {
    fn new(test_used: TestKind, statistic: f64, dof: f64, p_value: f64) -> Self {
        TestResult {
            feature: String::new(),
            test_used,
            statistic,
            dof,
            p_value: p_value.clamp(0.0, 1.0),
            mean_per_cluster: vec![],
            counts: vec![],
            difference: None,
            degenerate: false,
            note: None,
        }
    }
}

/// Student when var(s2)/var(s1) lies in [0.5, 2] (inclusive), Welch otherwise.
/// A constant `s1` makes the ratio undefined and selects Welch.
pub fn choose_t_test(s1: &[f64], s2: &[f64]) -> Result<TestKind> {
    if s1.len() < 2 || s2.len() < 2 {
        return Err(Error::invalid("t-test samples need at least two values each"));
    }
    let v1 = variance(s1);
    let v2 = variance(s2);
    if v1 == 0.0 {
        return Ok(TestKind::Welch);
    }
    let ratio = v2 / v1;
    Ok(if (0.5..=2.0).contains(&ratio) { TestKind::Student } else { TestKind::Welch })
}

/// Two-sided two-sample t-test. The statistic is signed as mean(s2) - mean(s1).
pub fn t_test(s1: &[f64], s2: &[f64], kind: TestKind) -> Result<TestResult> {
    let (n1, n2) = (s1.len() as f64, s2.len() as f64);
    if s1.len() < 2 || s2.len() < 2 {
        return Err(Error::invalid("t-test samples need at least two values each"));
    }
    let (m1, m2) = (mean(s1), mean(s2));
    let (v1, v2) = (variance(s1), variance(s2));
    let diff = m2 - m1;
    let (se, dof) = match kind {
        TestKind::Student => {
            let dof = n1 + n2 - 2.0;
            let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / dof;
            ((pooled * (1.0 / n1 + 1.0 / n2)).sqrt(), dof)
        }
        TestKind::Welch => {
            let (a, b) = (v1 / n1, v2 / n2);
            let dof = if a + b > 0.0 { (a + b).powi(2) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0)) } else { n1 + n2 - 2.0 };
            ((a + b).sqrt(), dof)
        }
        other => return Err(Error::invalid(format!("{other:?} is not a t-test"))),
    };
    let mut res = if se == 0.0 {
        let mut r = if diff == 0.0 {
            TestResult::new(kind, 0.0, dof, 1.0)
        } else {
            TestResult::new(kind, diff.signum() * f64::INFINITY, dof, 0.0)
        };
        r.degenerate = true;
        r
    } else {
        let t = diff / se;
        TestResult::new(kind, t, dof, student_t_two_sided(t, dof)?)
    };
    res.mean_per_cluster = vec![MeanStd { mean: m1, std: v1.sqrt() }, MeanStd { mean: m2, std: v2.sqrt() }];
    res.difference = Some(diff);
    Ok(res)
}

/// Exact binomial coefficient; `None` on overflow.
fn binom(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(r)
}

/// Two-sided Fisher exact test on a 2x2 table: sum of the probabilities of all
/// tables with the observed margins that are no more likely than the observed one.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> Result<f64> {
    let [[a, b], [c, d]] = table;
    let n = a + b + c + d;
    if n == 0 {
        return Err(Error::invalid("empty contingency table"));
    }
    let r1 = a + b;
    let c1 = a + c;
    let lo = (r1 + c1).saturating_sub(n);
    let hi = r1.min(c1);

    let exact: Option<Vec<u128>> =
        (lo..=hi).map(|x| Some(binom(c1, x)?.checked_mul(binom(n - c1, r1 - x)?)?)).collect();
    if let (Some(weights), Some(total)) = (exact, binom(n, r1)) {
        let obs = weights[(a - lo) as usize];
        let num: u128 = weights.iter().filter(|&&w| w <= obs).sum();
        return Ok((num as f64 / total as f64).min(1.0));
    }

    // log-space fallback for large tables
    let lchoose = |n: u64, k: u64| -> Result<f64> {
        Ok(log_gamma(n as f64 + 1.0)? - log_gamma(k as f64 + 1.0)? - log_gamma((n - k) as f64 + 1.0)?)
    };
    let ltotal = lchoose(n, r1)?;
    let logs: Vec<f64> =
        (lo..=hi).map(|x| Ok(lchoose(c1, x)? + lchoose(n - c1, r1 - x)? - ltotal)).collect::<Result<_>>()?;
    let obs = logs[(a - lo) as usize];
    let p: f64 = logs.iter().filter(|&&l| l <= obs + 1e-7).map(|l| l.exp()).sum();
    Ok(p.min(1.0))
}

/// Chi-square or Fisher test on an r x c contingency table.
///
/// Empty rows and columns are dropped first. A 2x2 table with any expected
/// count below 5 uses Fisher's exact test; everything else uses Pearson's
/// chi-square without continuity correction.
pub fn categorical_test(table: &[Vec<u64>]) -> Result<TestResult> {
    let cols = table.first().map_or(0, Vec::len);
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("ragged contingency table"));
    }
    let total: u64 = table.iter().flatten().sum();
    if total == 0 {
        return Err(Error::invalid("contingency table total must be at least 1"));
    }
    let keep_rows: Vec<usize> = (0..table.len()).filter(|&i| table[i].iter().sum::<u64>() > 0).collect();
    let keep_cols: Vec<usize> = (0..cols).filter(|&j| table.iter().map(|r| r[j]).sum::<u64>() > 0).collect();
    let reduced: Vec<Vec<u64>> = keep_rows.iter().map(|&i| keep_cols.iter().map(|&j| table[i][j]).collect()).collect();
    let mut notes = Vec::new();
    if keep_rows.len() < table.len() || keep_cols.len() < cols {
        notes.push(format!(
            "dropped {} empty row(s) and {} empty column(s)",
            table.len() - keep_rows.len(),
            cols - keep_cols.len()
        ));
    }

    let (r, c) = (reduced.len(), keep_cols.len());
    let mut res = if r < 2 || c < 2 {
        notes.push("table degenerates below 2x2".into());
        let mut t = TestResult::new(TestKind::Chi2, 0.0, 0.0, 1.0);
        t.degenerate = true;
        t
    } else {
        let n = total as f64;
        let row_sums: Vec<f64> = reduced.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
        let col_sums: Vec<f64> = (0..c).map(|j| reduced.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
        let min_expected = row_sums
            .iter()
            .flat_map(|ri| col_sums.iter().map(move |cj| ri * cj / n))
            .fold(f64::INFINITY, f64::min);
        if r == 2 && c == 2 && min_expected < 5.0 {
            let p = fisher_exact([[reduced[0][0], reduced[0][1]], [reduced[1][0], reduced[1][1]]])?;
            let odds = (reduced[0][0] * reduced[1][1]) as f64 / (reduced[0][1] * reduced[1][0]) as f64;
            TestResult::new(TestKind::Fisher, odds, 1.0, p)
        } else {
            if min_expected < 5.0 {
                notes.push("sparse table larger than 2x2: chi-square approximation used".into());
            }
            let mut stat = 0.0;
            for (i, row) in reduced.iter().enumerate() {
                for (j, &o) in row.iter().enumerate() {
                    let e = row_sums[i] * col_sums[j] / n;
                    stat += (o as f64 - e).powi(2) / e;
                }
            }
            let dof = ((r - 1) * (c - 1)) as f64;
            TestResult::new(TestKind::Chi2, stat, dof, chi_square_sf(stat, dof)?)
        }
    };
    res.counts = table.to_vec();
    if !notes.is_empty() {
        res.note = Some(notes.join("; "));
    }
    Ok(res)
}
