//! Two-cluster comparative tests: Student/Welch for numeric columns (chosen
//! by the variance ratio), chi-square/Fisher for categorical columns, and
//! screening at a fixed significance level.

pub mod special;
mod tests_impl;

pub use tests_impl::{categorical_test, choose_t_test, fisher_exact, t_test, MeanStd, TestKind, TestResult};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Cell, ClinicalBands, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsOptions {
    pub alpha: f64,
    /// Divide alpha by the number of tested columns.
    pub bonferroni: bool,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions { alpha: 0.05, bonferroni: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificantFeature {
    pub feature: String,
    pub p_value: f64,
    pub test_used: TestKind,
    /// Numeric columns only.
    pub direction: Option<Direction>,
    pub mean: Option<f64>,
    pub band: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFindings {
    pub cluster: usize,
    pub features: Vec<SignificantFeature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsProfile {
    pub alpha: f64,
    pub effective_alpha: f64,
    pub n_tested: usize,
    /// Retained tests, by p-value then name.
    pub significant: Vec<TestResult>,
    pub clusters: Vec<ClusterFindings>,
}

/// Splits `values` by a two-valued label vector.
fn split<T: Copy>(values: &[T], labels: &[usize]) -> (Vec<T>, Vec<T>) {
    let a = values.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(v, _)| *v).collect();
    let b = values.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(v, _)| *v).collect();
    (a, b)
}

pub fn characterize_by_tests(
    d: &Dataset,
    labels: &[usize],
    opts: &StatsOptions,
    bands: &ClinicalBands,
) -> Result<StatsProfile> {
    if labels.len() != d.n_rows() {
        return Err(Error::invalid("label count differs from row count"));
    }
    if labels.iter().any(|&l| l > 1) || !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::invalid("comparative tests need exactly two clusters labelled 0 and 1"));
    }
    if !(opts.alpha > 0.0 && opts.alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {}", opts.alpha)));
    }
    if d.missing_count() > 0 {
        return Err(Error::invalid("comparative tests need a complete dataset"));
    }

    let mut results: Vec<TestResult> = (0..d.n_cols())
        .into_par_iter()
        .map(|j| {
            let col = &d.schema[j];
            let mut res = match col.kind {
                ColumnKind::Numeric => {
                    let xs: Vec<f64> = d.rows.iter().map(|r| r[j].and_then(Cell::as_number).unwrap_or(0.0)).collect();
                    let (s0, s1) = split(&xs, labels);
                    t_test(&s0, &s1, choose_t_test(&s0, &s1)?)?
                }
                ColumnKind::Categorical => {
                    let mut table = vec![vec![0u64; col.categories.len()]; 2];
                    for (r, &l) in d.rows.iter().zip(labels) {
                        if let Some(c) = r[j].and_then(Cell::as_category) {
                            table[l][c] += 1;
                        }
                    }
                    categorical_test(&table)?
                }
            };
            res.feature = col.name.clone();
            Ok(res)
        })
        .collect::<Result<_>>()?;

    let n_tested = results.len();
    let effective_alpha = if opts.bonferroni { opts.alpha / n_tested.max(1) as f64 } else { opts.alpha };
    results.retain(|r| r.p_value <= effective_alpha);
    results.sort_by(|a, b| a.p_value.total_cmp(&b.p_value).then_with(|| a.feature.cmp(&b.feature)));

    let clusters = (0..2)
        .map(|c| {
            let features = results
                .iter()
                .map(|r| {
                    let mean = r.mean_per_cluster.get(c).map(|m| m.mean);
                    let direction = r.difference.and_then(|diff| {
                        let up = if c == 1 { diff } else { -diff };
                        Direction::from_sign(up)
                    });
                    let scale = d.schema.iter().find(|s| s.name == r.feature).and_then(|s| s.clinical_scale.as_deref());
                    let band = match (scale, mean) {
                        (Some(s), Some(m)) => bands.label(s, m).map(str::to_string),
                        _ => None,
                    };
                    SignificantFeature { feature: r.feature.clone(), p_value: r.p_value, test_used: r.test_used, direction, mean, band }
                })
                .collect();
            ClusterFindings { cluster: c, features }
        })
        .collect();

    Ok(StatsProfile { alpha: opts.alpha, effective_alpha, n_tested, significant: results, clusters })
}

impl StatsProfile {
    /// Markdown table: Variable | Cluster 0 | Cluster 1 | Différence.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Variable | Cluster 0 | Cluster 1 | Différence | Test | p-value |\n|---|---|---|---|---|---|\n");
        for r in &self.significant {
            let (c0, c1, diff) = match (r.mean_per_cluster.as_slice(), r.difference) {
                ([a, b], Some(d)) => (
                    format!("{:.2} ± {:.2}", a.mean, a.std),
                    format!("{:.2} ± {:.2}", b.mean, b.std),
                    format!("{d:+.2}"),
                ),
                _ => {
                    let fmt = |row: Option<&Vec<u64>>| {
                        row.map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join("/")).unwrap_or_default()
                    };
                    (fmt(r.counts.first()), fmt(r.counts.get(1)), "—".to_string())
                }
            };
            s.push_str(&format!(
                "| {} | {} | {} | {} | {:?} | {:.3e} |\n",
                r.feature, c0, c1, diff, r.test_used, r.p_value
            ));
        }
        s
    }
}
