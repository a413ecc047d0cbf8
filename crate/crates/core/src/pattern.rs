//! In-pattern / out-pattern characterization.
//!
//! For cluster k, the member distances to the centroid define a band
//! `mean ± z·std`. Points inside the band are in-pattern, the rest
//! out-pattern. The differentiation factor of feature v is the relative gap
//! `(mean_in - mean_out) / mean_out`; features whose factor falls outside
//! `mean_df ± z·std_df` (over all features of the cluster) are salient, high
//! when the factor is positive and low when negative.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, dist};
use crate::Direction;

/// Replacement magnitude for factors whose out-pattern mean is ~0 in raw mode.
pub const DF_CAP: f64 = 1e3;
pub const DF_EPS: f64 = 1e-6;

/// Which rows are classified against a cluster's distance band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternScope {
    /// Every row of the cohort; the band still comes from the members.
    Cohort,
    /// Only the cluster's own members.
    Members,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternOptions {
    pub z_pattern: f64,
    pub z_salient: f64,
    /// Positive shift added to standardized values before taking ratios;
    /// `None` uses the standardized values as-is.
    pub shift: Option<f64>,
    pub scope: PatternScope,
}

impl Default for PatternOptions {
    fn default() -> Self {
        PatternOptions { z_pattern: 1.0, z_salient: 1.0, shift: Some(5.0), scope: PatternScope::Cohort }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternPartition {
    pub cluster_id: usize,
    pub centroid: Vec<f64>,
    /// `(row, distance to centroid)` for every classified row.
    pub distances: Vec<(usize, f64)>,
    pub mu: f64,
    pub sigma: f64,
    pub z: f64,
    pub scope: PatternScope,
    pub in_members: Vec<usize>,
    pub out_members: Vec<usize>,
    pub degenerate: bool,
}

pub fn partition_in_out(
    m: &FeatureMatrix,
    labels: &[usize],
    cluster_id: usize,
    z: f64,
    scope: PatternScope,
) -> Result<PatternPartition> {
    if labels.len() != m.n() {
        return Err(Error::invalid("label count differs from row count"));
    }
    if !(z > 0.0) {
        return Err(Error::invalid(format!("z must be positive, got {z}")));
    }
    let members: Vec<usize> = (0..m.n()).filter(|&i| labels[i] == cluster_id).collect();
    if members.is_empty() {
        return Err(Error::invalid(format!("cluster {cluster_id} is empty")));
    }
    let centroid = m.values.select_rows(&members).column_means();
    let member_d: Vec<f64> = members.iter().map(|&i| dist(m.values.row(i), &centroid)).collect();
    let mu = linalg::mean(&member_d);
    let sigma = linalg::variance(&member_d).sqrt();

    let rows: Vec<usize> = match scope {
        PatternScope::Cohort => (0..m.n()).collect(),
        PatternScope::Members => members.clone(),
    };
    let distances: Vec<(usize, f64)> = rows.iter().map(|&i| (i, dist(m.values.row(i), &centroid))).collect();
    let degenerate = members.len() < 3;
    let (lo, hi) = (mu - z * sigma, mu + z * sigma);
    let mut in_members = Vec::new();
    let mut out_members = Vec::new();
    for &(i, d) in &distances {
        let is_member = labels[i] == cluster_id;
        let inside = if is_member && (degenerate || sigma == 0.0) { true } else { d >= lo && d <= hi };
        if inside {
            in_members.push(i);
        } else {
            out_members.push(i);
        }
    }
    Ok(PatternPartition { cluster_id, centroid, distances, mu, sigma, z, scope, in_members, out_members, degenerate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFactor {
    pub feature: String,
    pub df: f64,
    pub mu_in: f64,
    pub mu_out: f64,
    /// The out-pattern mean was below the epsilon guard and `df` was capped.
    #[serde(default)]
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientFeature {
    pub feature: String,
    pub direction: Direction,
    pub df: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentiationReport {
    pub cluster_id: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub factors: Vec<FeatureFactor>,
    pub mu_df: f64,
    pub sigma_df: f64,
    pub salient: Vec<SalientFeature>,
    /// Out-pattern set empty: factors undefined.
    pub degenerate: bool,
}

impl DifferentiationReport {
    pub fn high(&self) -> impl Iterator<Item = &SalientFeature> {
        self.salient.iter().filter(|s| s.direction == Direction::High)
    }

    pub fn low(&self) -> impl Iterator<Item = &SalientFeature> {
        self.salient.iter().filter(|s| s.direction == Direction::Low)
    }
}

pub fn differentiation_factors(
    m: &FeatureMatrix,
    part: &PatternPartition,
    opts: &PatternOptions,
) -> DifferentiationReport {
    let empty = |degenerate| DifferentiationReport {
        cluster_id: part.cluster_id,
        n_in: part.in_members.len(),
        n_out: part.out_members.len(),
        factors: vec![],
        mu_df: 0.0,
        sigma_df: 0.0,
        salient: vec![],
        degenerate,
    };
    if part.out_members.is_empty() || part.in_members.is_empty() {
        return empty(true);
    }
    let shift = opts.shift.unwrap_or(0.0);
    let in_mean = m.values.select_rows(&part.in_members).column_means();
    let out_mean = m.values.select_rows(&part.out_members).column_means();

    let factors: Vec<FeatureFactor> = (0..m.d())
        .map(|j| {
            let mu_in = in_mean[j] + shift;
            let mu_out = out_mean[j] + shift;
            let (df, capped) = if mu_out.abs() < DF_EPS {
                ((mu_in - mu_out).signum() * DF_CAP * if mu_in == mu_out { 0.0 } else { 1.0 }, true)
            } else {
                ((mu_in - mu_out) / mu_out, false)
            };
            FeatureFactor { feature: m.feature_names[j].clone(), df, mu_in, mu_out, capped }
        })
        .collect();

    let dfs: Vec<f64> = factors.iter().map(|f| f.df).collect();
    let mu_df = linalg::mean(&dfs);
    let sigma_df = linalg::pop_std(&dfs);
    let salient = if sigma_df > 0.0 {
        let (lo, hi) = (mu_df - opts.z_salient * sigma_df, mu_df + opts.z_salient * sigma_df);
        factors
            .iter()
            .filter(|f| f.df <= lo || f.df >= hi)
            .filter_map(|f| {
                Direction::from_sign(f.df).map(|direction| SalientFeature { feature: f.feature.clone(), direction, df: f.df })
            })
            .collect()
    } else {
        vec![]
    };
    DifferentiationReport { factors, mu_df, sigma_df, salient, ..empty(false) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub options: PatternOptions,
    pub clusters: Vec<DifferentiationReport>,
}

pub fn characterize_by_patterns(m: &FeatureMatrix, labels: &[usize], opts: &PatternOptions) -> Result<PatternReport> {
    let k = labels.iter().copied().max().map_or(0, |x| x + 1);
    if k < 2 {
        return Err(Error::invalid("pattern characterization needs at least two clusters"));
    }
    let clusters = (0..k)
        .into_par_iter()
        .map(|c| {
            let part = partition_in_out(m, labels, c, opts.z_pattern, opts.scope)?;
            Ok(differentiation_factors(m, &part, opts))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PatternReport { options: *opts, clusters })
}

impl PatternReport {
    pub fn to_markdown(&self) -> String {
        let mode = match self.options.shift {
            Some(s) => format!("standardized values shifted by +{s}"),
            None => "raw standardized values".to_string(),
        };
        let mut s = format!(
            "Differentiation factors on {mode}; z_pattern = {}, z_salient = {}, scope = {:?}.\n\n",
            self.options.z_pattern, self.options.z_salient, self.options.scope
        );
        for c in &self.clusters {
            s.push_str(&format!("**Cluster {}** ({} in-pattern, {} out-pattern)\n\n", c.cluster_id, c.n_in, c.n_out));
            if c.degenerate {
                s.push_str("- degenerate partition: no out-pattern rows\n\n");
                continue;
            }
            let list = |it: &mut dyn Iterator<Item = &SalientFeature>| {
                let v: Vec<String> = it.map(|f| format!("{} ({:+.3})", f.feature, f.df)).collect();
                if v.is_empty() { "—".to_string() } else { v.join(", ") }
            };
            s.push_str(&format!("- majoritairement élevées: {}\n", list(&mut c.high())));
            s.push_str(&format!("- majoritairement faibles: {}\n\n", list(&mut c.low())));
        }
        s
    }
}
