//! Delimitation points: rows near the inter-cluster boundary that are not
//! outliers.
//!
//! The border score of a row is the share of its `knn_k` nearest neighbors
//! (excluding itself) that belong to the other cluster. Rows whose isolation
//! forest score exceeds the anomaly cutoff are not eligible. Each cluster
//! keeps its top rows by (border score desc, distance to the other centroid
//! asc, row index).

pub mod isoforest;
pub mod kdtree;

use serde::{Deserialize, Serialize};

use crate::cluster::pca_project;
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::seed;

pub use isoforest::{IsoParams, IsolationForest};
pub use kdtree::{knn_scan, KdTree, Neighbor};

/// How the per-cluster quota is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotaBase {
    /// `ceil(fraction × cluster size)`.
    ClusterSize,
    /// `round(fraction × cohort size)` for every cluster, capped at its size.
    Cohort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelimitationOptions {
    pub fraction: f64,
    pub knn_k: usize,
    pub anomaly_cutoff: f64,
    pub quota: QuotaBase,
    pub iso: IsoParams,
}

impl Default for DelimitationOptions {
    fn default() -> Self {
        DelimitationOptions {
            fraction: 0.05,
            knn_k: 10,
            anomaly_cutoff: 0.65,
            quota: QuotaBase::ClusterSize,
            iso: IsoParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelimitationPoint {
    pub row: usize,
    pub row_id: String,
    pub border_score: f64,
    pub anomaly_score: f64,
    pub distance_to_other: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDelimitation {
    pub cluster: usize,
    pub size: usize,
    pub quota: usize,
    pub selected: Vec<DelimitationPoint>,
    /// Cutoff actually applied; above the requested one when relaxed.
    pub cutoff_used: f64,
    pub relaxed: bool,
    /// No candidate had a neighbor from the other cluster.
    pub no_mixing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub row_id: String,
    pub cluster: usize,
    pub pc1: f64,
    pub pc2: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelimitationSet {
    pub options: DelimitationOptions,
    pub clusters: Vec<ClusterDelimitation>,
    pub explained_variance_ratio: [f64; 2],
    pub plot: Vec<PlotPoint>,
}

impl DelimitationSet {
    pub fn rows(&self) -> impl Iterator<Item = (usize, &DelimitationPoint)> {
        self.clusters.iter().flat_map(|c| c.selected.iter().map(move |p| (c.cluster, p)))
    }
}

pub fn border_scores(tree: &KdTree, m: &FeatureMatrix, labels: &[usize], knn_k: usize) -> Result<Vec<f64>> {
    let k = (knn_k + 1).min(m.n());
    (0..m.n())
        .map(|i| {
            let nn = tree.knn(m.values.row(i), k)?;
            let others: Vec<&Neighbor> = nn.iter().filter(|n| n.index != i).take(knn_k).collect();
            if others.is_empty() {
                return Ok(0.0);
            }
            Ok(others.iter().filter(|n| labels[n.index] != labels[i]).count() as f64 / others.len() as f64)
        })
        .collect()
}

pub fn select_delimitation(
    m: &FeatureMatrix,
    labels: &[usize],
    opts: &DelimitationOptions,
    seed: u64,
) -> Result<DelimitationSet> {
    if labels.len() != m.n() {
        return Err(Error::invalid("label count differs from row count"));
    }
    if !(opts.fraction > 0.0 && opts.fraction <= 0.5) {
        return Err(Error::invalid(format!("fraction must lie in (0, 0.5], got {}", opts.fraction)));
    }
    if opts.knn_k == 0 {
        return Err(Error::invalid("knn_k must be positive"));
    }
    let k = labels.iter().copied().max().map_or(0, |x| x + 1);
    let members: Vec<Vec<usize>> = (0..k).map(|c| (0..m.n()).filter(|&i| labels[i] == c).collect()).collect();
    if k != 2 || members.iter().any(Vec::is_empty) {
        return Err(Error::invalid("delimitation needs exactly two non-empty clusters"));
    }
    let centroids: Vec<Vec<f64>> = members.iter().map(|g| m.values.select_rows(g).column_means()).collect();

    let tree = KdTree::build(&m.values)?;
    let border = border_scores(&tree, m, labels, opts.knn_k)?;
    let forest = IsolationForest::fit(&m.values, &opts.iso, seed::derive_named(seed, "isoforest"))?;
    let anomaly: Vec<f64> = m.values.iter_rows().map(|r| forest.score(r)).collect();

    let mut clusters = Vec::with_capacity(2);
    for (c, g) in members.iter().enumerate() {
        let quota = match opts.quota {
            QuotaBase::ClusterSize => (opts.fraction * g.len() as f64).ceil() as usize,
            QuotaBase::Cohort => (opts.fraction * m.n() as f64).round() as usize,
        }
        .clamp(1, g.len());
        let other = &centroids[1 - c];
        let mut cutoff = opts.anomaly_cutoff;
        let mut relaxed = false;
        let mut eligible: Vec<usize>;
        loop {
            eligible = g.iter().copied().filter(|&i| anomaly[i] <= cutoff).collect();
            if eligible.len() >= quota || cutoff >= 1.0 {
                break;
            }
            cutoff = (cutoff + 0.05).min(1.0);
            relaxed = true;
        }
        let d_other: Vec<f64> = (0..m.n()).map(|i| dist(m.values.row(i), other)).collect();
        eligible.sort_by(|&a, &b| {
            border[b].total_cmp(&border[a]).then(d_other[a].total_cmp(&d_other[b])).then(a.cmp(&b))
        });
        let no_mixing = eligible.iter().all(|&i| border[i] == 0.0);
        let selected = eligible
            .iter()
            .take(quota)
            .map(|&i| DelimitationPoint {
                row: i,
                row_id: m.row_ids[i].clone(),
                border_score: border[i],
                anomaly_score: anomaly[i],
                distance_to_other: d_other[i],
            })
            .collect();
        clusters.push(ClusterDelimitation { cluster: c, size: g.len(), quota, selected, cutoff_used: cutoff, relaxed, no_mixing });
    }

    let pca = pca_project(m)?;
    let chosen: std::collections::BTreeSet<usize> = clusters.iter().flat_map(|c| c.selected.iter().map(|p| p.row)).collect();
    let plot = (0..m.n())
        .map(|i| PlotPoint {
            row_id: m.row_ids[i].clone(),
            cluster: labels[i],
            pc1: pca.coordinates.get(i, 0),
            pc2: pca.coordinates.get(i, 1),
            selected: chosen.contains(&i),
        })
        .collect();
    Ok(DelimitationSet { options: *opts, clusters, explained_variance_ratio: pca.explained_variance_ratio, plot })
}

impl DelimitationSet {
    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "{} nearest neighbors, anomaly cutoff {}, fraction {} ({}).\n\n| Cluster | Row | Border score | Anomaly score |\n|---|---|---|---|\n",
            self.options.knn_k,
            self.options.anomaly_cutoff,
            self.options.fraction,
            match self.options.quota {
                QuotaBase::ClusterSize => "per cluster size",
                QuotaBase::Cohort => "of the cohort, per cluster",
            }
        );
        for c in &self.clusters {
            for p in &c.selected {
                s.push_str(&format!("| {} | {} | {:.2} | {:.3} |\n", c.cluster, p.row_id, p.border_score, p.anomaly_score));
            }
        }
        for c in &self.clusters {
            if c.relaxed {
                s.push_str(&format!("\nCluster {}: anomaly cutoff relaxed to {:.2}.", c.cluster, c.cutoff_used));
            }
            if c.no_mixing {
                s.push_str(&format!("\nCluster {}: no mixing, ranked by distance to the other centroid.", c.cluster));
            }
        }
        s.push('\n');
        s
    }
}
