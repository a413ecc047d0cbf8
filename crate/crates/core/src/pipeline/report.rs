//! Run report: every stage section plus the cross-method synthesis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    read_artifact, ClusterArtifact, DataSummary, RunConfig, Stage, CLUSTERING, DATA_SUMMARY, DELIMITATION, EXPLANATIONS,
    MODELS, PATTERN, STATS,
};
use crate::boundary::DelimitationSet;
use crate::error::{Error, Result};
use crate::pattern::PatternReport;
use crate::stats::StatsProfile;
use crate::supervised::ModelComparison;
use crate::xai::BoundaryExplanations;
use crate::Direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Section<T> {
    Done { result: T },
    Skipped { reason: String },
}

impl<T> Section<T> {
    pub fn result(&self) -> Option<&T> {
        match self {
            Section::Done { result } => Some(result),
            Section::Skipped { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub k: usize,
    pub silhouette: Option<f64>,
    pub scores: BTreeMap<usize, f64>,
    pub sizes: Vec<usize>,
    pub inertia: f64,
    pub explained_variance_ratio: [f64; 2],
    pub pca: Vec<(String, [f64; 2])>,
}

/// Direction given to a feature in one cluster by one method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDirections {
    pub method: String,
    /// cluster → feature → direction
    pub directions: BTreeMap<usize, BTreeMap<String, Direction>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub cluster: usize,
    pub feature: String,
    pub high: Vec<String>,
    pub low: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consistency {
    pub methods: Vec<String>,
    pub conflicts: Vec<Conflict>,
}

impl Consistency {
    pub fn consistent(&self) -> bool {
        self.conflicts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Support {
    pub feature: String,
    pub methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bilan {
    pub cluster: usize,
    pub size: usize,
    pub high: Vec<Support>,
    pub low: Vec<Support>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub data: DataSummary,
    pub clustering: ClusteringSummary,
    pub stats: Section<StatsProfile>,
    pub pattern: Section<PatternReport>,
    pub models: Section<ModelComparison>,
    pub boundary: Section<DelimitationSet>,
    pub xai: Section<BoundaryExplanations>,
    pub consistency: Consistency,
    pub bilan: Vec<Bilan>,
}

fn section<T: serde::de::DeserializeOwned>(cfg: &RunConfig, stage: Stage, artifact: &str) -> Result<Section<T>> {
    if !cfg.enabled(stage) {
        let reason = if cfg.skip.contains(&stage) {
            "skipped on request".to_string()
        } else {
            let up: Vec<&str> = stage.requires().iter().filter(|&&s| !cfg.enabled(s)).map(|s| s.name()).collect();
            format!("skipped: depends on skipped stage {}", up.join(", "))
        };
        return Ok(Section::Skipped { reason });
    }
    match read_artifact(cfg, artifact) {
        Ok(result) => Ok(Section::Done { result }),
        Err(Error::MissingArtifact(name)) => Ok(Section::Skipped { reason: format!("not run: `{name}` is missing") }),
        Err(e) => Err(e),
    }
}

pub fn method_directions(
    stats: Option<&StatsProfile>,
    pattern: Option<&PatternReport>,
    xai: Option<&BoundaryExplanations>,
) -> Vec<MethodDirections> {
    let mut out = Vec::new();
    if let Some(s) = stats {
        let mut d = BTreeMap::new();
        for c in &s.clusters {
            let m: BTreeMap<String, Direction> =
                c.features.iter().filter_map(|f| f.direction.map(|dir| (f.feature.clone(), dir))).collect();
            d.insert(c.cluster, m);
        }
        out.push(MethodDirections { method: "stats".into(), directions: d });
    }
    if let Some(p) = pattern {
        let mut d = BTreeMap::new();
        for c in &p.clusters {
            d.insert(c.cluster_id, c.salient.iter().map(|f| (f.feature.clone(), f.direction)).collect());
        }
        out.push(MethodDirections { method: "pattern".into(), directions: d });
    }
    if let Some(x) = xai {
        let mut d = BTreeMap::new();
        for c in &x.clusters {
            d.insert(c.cluster, c.frequency.iter().filter_map(|f| f.direction.map(|dir| (f.feature.clone(), dir))).collect());
        }
        out.push(MethodDirections { method: "xai".into(), directions: d });
    }
    out
}

/// (cluster, feature) → (methods saying high, methods saying low)
fn tally(methods: &[MethodDirections]) -> BTreeMap<(usize, String), (Vec<String>, Vec<String>)> {
    let mut t: BTreeMap<(usize, String), (Vec<String>, Vec<String>)> = BTreeMap::new();
    for m in methods {
        for (&c, feats) in &m.directions {
            for (f, dir) in feats {
                let e = t.entry((c, f.clone())).or_default();
                match dir {
                    Direction::High => e.0.push(m.method.clone()),
                    Direction::Low => e.1.push(m.method.clone()),
                }
            }
        }
    }
    t
}

pub fn consistency(methods: &[MethodDirections]) -> Consistency {
    let conflicts = tally(methods)
        .into_iter()
        .filter(|(_, (h, l))| !h.is_empty() && !l.is_empty())
        .map(|((cluster, feature), (high, low))| Conflict { cluster, feature, high, low })
        .collect();
    Consistency { methods: methods.iter().map(|m| m.method.clone()).collect(), conflicts }
}

/// Per cluster, features whose direction is backed by at least two methods
/// (or by the only method available) and contradicted by none.
pub fn bilan(methods: &[MethodDirections], sizes: &[usize]) -> Vec<Bilan> {
    let need = if methods.len() >= 2 { 2 } else { 1 };
    let t = tally(methods);
    (0..sizes.len())
        .map(|c| {
            let mut high = Vec::new();
            let mut low = Vec::new();
            for ((cl, f), (h, l)) in &t {
                if *cl != c {
                    continue;
                }
                if h.len() >= need && l.is_empty() {
                    high.push(Support { feature: f.clone(), methods: h.clone() });
                } else if l.len() >= need && h.is_empty() {
                    low.push(Support { feature: f.clone(), methods: l.clone() });
                }
            }
            let by_support = |a: &Support, b: &Support| b.methods.len().cmp(&a.methods.len()).then_with(|| a.feature.cmp(&b.feature));
            high.sort_by(by_support);
            low.sort_by(by_support);
            let list = |v: &[Support]| v.iter().map(|s| s.feature.as_str()).collect::<Vec<_>>().join(", ");
            let text = match (high.is_empty(), low.is_empty()) {
                (true, true) => format!("Le cluster {c} ({} individus) ne présente pas de variable caractéristique concordante.", sizes[c]),
                (false, true) => format!("Le cluster {c} ({} individus) se distingue par des valeurs élevées de {}.", sizes[c], list(&high)),
                (true, false) => format!("Le cluster {c} ({} individus) se distingue par des valeurs faibles de {}.", sizes[c], list(&low)),
                (false, false) => format!(
                    "Le cluster {c} ({} individus) se distingue par des valeurs élevées de {} et des valeurs faibles de {}.",
                    sizes[c],
                    list(&high),
                    list(&low)
                ),
            };
            Bilan { cluster: c, size: sizes[c], high, low, text }
        })
        .collect()
}

pub fn assemble_report(cfg: &RunConfig) -> Result<RunReport> {
    let data: DataSummary = read_artifact(cfg, DATA_SUMMARY)?;
    let cl: ClusterArtifact = read_artifact(cfg, CLUSTERING)?;
    let clustering = ClusteringSummary {
        k: cl.clustering.k,
        silhouette: cl.clustering.silhouette,
        scores: cl.selection.scores.clone(),
        sizes: cl.clustering.sizes(),
        inertia: cl.clustering.inertia,
        explained_variance_ratio: cl.explained_variance_ratio,
        pca: cl.pca,
    };
    let stats = section(cfg, Stage::Stats, STATS)?;
    let pattern = section(cfg, Stage::Pattern, PATTERN)?;
    let models = section(cfg, Stage::Train, MODELS)?;
    let boundary = section(cfg, Stage::Boundary, DELIMITATION)?;
    let xai = section(cfg, Stage::Xai, EXPLANATIONS)?;
    let methods = method_directions(stats.result(), pattern.result(), xai.result());
    let consistency = consistency(&methods);
    let bilan = bilan(&methods, &clustering.sizes);
    Ok(RunReport { config: cfg.clone(), data, clustering, stats, pattern, models, boundary, xai, consistency, bilan })
}

fn render<T>(s: &Section<T>, f: impl Fn(&T) -> String) -> String {
    match s {
        Section::Done { result } => f(result),
        Section::Skipped { reason } => format!("*Section not produced ({reason}).*\n"),
    }
}

impl RunReport {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Caractérisation des clusters\n\n## Données\n\n");
        s.push_str(&format!(
            "{} rows read, {} complete rows kept; {} columns encoded into {} standardized features.\n",
            self.data.n_input_rows, self.data.n_complete_rows, self.data.n_columns, self.data.n_features
        ));
        if !self.data.dropped_features.is_empty() {
            s.push_str(&format!("Constant features dropped: {}.\n", self.data.dropped_features.join(", ")));
        }
        let c = &self.clustering;
        s.push_str(&format!("\n## Clustering\n\nK = {} (silhouette {}), cluster sizes {:?}.\n\n| K | Silhouette |\n|---|---|\n", c.k, c.silhouette.map_or("n/a".into(), |v| format!("{v:.4}")), c.sizes));
        for (k, v) in &c.scores {
            s.push_str(&format!("| {k} | {v:.4} |\n"));
        }
        s.push_str(&format!(
            "\nThe first two principal components explain {:.1}% and {:.1}% of the variance.\n",
            100.0 * c.explained_variance_ratio[0],
            100.0 * c.explained_variance_ratio[1]
        ));
        s.push_str("\n## Tests statistiques\n\n");
        s.push_str(&render(&self.stats, StatsProfile::to_markdown));
        s.push_str("\n## In-pattern / out-pattern\n\n");
        s.push_str(&render(&self.pattern, PatternReport::to_markdown));
        s.push_str("\n## Modèles de classification\n\n");
        s.push_str(&render(&self.models, ModelComparison::to_markdown));
        s.push_str("\n## Points de délimitation\n\n");
        s.push_str(&render(&self.boundary, DelimitationSet::to_markdown));
        s.push_str("\n## Explications SHAP et formelles\n\n");
        s.push_str(&render(&self.xai, BoundaryExplanations::to_markdown));
        s.push_str("\n## Bilan\n\n");
        for b in &self.bilan {
            s.push_str(&b.text);
            s.push_str("\n\n");
        }
        if self.consistency.consistent() {
            s.push_str(&format!("No contradictory direction across methods ({}).\n", self.consistency.methods.join(", ")));
        } else {
            s.push_str("Contradictory directions:\n\n");
            for k in &self.consistency.conflicts {
                s.push_str(&format!(
                    "- cluster {}, {}: high per {}, low per {}\n",
                    k.cluster,
                    k.feature,
                    k.high.join("/"),
                    k.low.join("/")
                ));
            }
        }
        s
    }
}
