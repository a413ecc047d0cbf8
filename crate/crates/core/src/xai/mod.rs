//! SHAP attributions, sufficient-reason rules and their intersection into
//! short explanations of boundary instances.

pub mod formal;
pub mod shap;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::DelimitationSet;
use crate::data::{ClinicalBands, ColumnSchema, FeatureMatrix};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed;
use crate::supervised::Model;
use crate::Direction;

pub use formal::{forced_class_check, instance_literals, is_irredundant, sufficient_reason, Literal, Op, Rule};
pub use shap::{brute_force_shap, shap, shap_linear, shap_tree, Attribution};

pub const TOP_N: usize = 10;
pub const BACKGROUND_CAP: usize = 100;

/// Deterministic subsample of at most `cap` rows, in ascending order.
pub fn background_rows(rows: &[usize], cap: usize, seed: u64) -> Vec<usize> {
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let mut pick: Vec<usize> = sample(&mut seed::rng(seed), rows.len(), cap).into_iter().map(|i| rows[i]).collect();
    pick.sort_unstable();
    pick
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortExplanation {
    pub instance: String,
    pub class: usize,
    /// Features by decreasing |phi|, at most `top_n`.
    pub top_shap: Vec<usize>,
    pub formal_rule: Rule,
    pub intersected_rule: Rule,
    /// The intersection was empty and the formal rule is used instead.
    pub fallback: bool,
}

/// Keeps the rule literals whose feature is among the `top_n` largest |phi|
/// (ties by feature name).
pub fn intersect_explanations(att: &Attribution, rule: &Rule, names: &[String], top_n: usize) -> ShortExplanation {
    let mut order: Vec<usize> = (0..att.phi.len()).collect();
    order.sort_by(|&a, &b| att.phi[b].abs().total_cmp(&att.phi[a].abs()).then_with(|| names[a].cmp(&names[b])));
    order.truncate(top_n);
    let literals: Vec<Literal> = rule.literals.iter().filter(|l| order.contains(&l.feature)).copied().collect();
    let fallback = literals.is_empty() && !rule.literals.is_empty();
    let intersected_rule = if fallback { rule.clone() } else { Rule { literals, class: rule.class } };
    ShortExplanation {
        instance: att.instance.clone(),
        class: rule.class,
        top_shap: order,
        formal_rule: rule.clone(),
        intersected_rule,
        fallback,
    }
}

/// A literal rendered in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub feature: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<String>,
}

/// What is needed to render model-space literals for people.
#[derive(Debug, Clone)]
pub struct FeatureContext<'a> {
    pub features: &'a FeatureMatrix,
    pub scales: Vec<Option<String>>,
    pub bands: &'a ClinicalBands,
}

impl<'a> FeatureContext<'a> {
    pub fn new(features: &'a FeatureMatrix, schema: &[ColumnSchema], bands: &'a ClinicalBands) -> Self {
        let scales = features
            .origin
            .iter()
            .map(|o| schema.iter().find(|c| c.name == o.column).and_then(|c| c.clinical_scale.clone()))
            .collect();
        FeatureContext { features, scales, bands }
    }

    pub fn read(&self, l: &Literal) -> Reading {
        let fm = self.features;
        let j = l.feature;
        let v = fm.original_value(j, l.value);
        let origin = &fm.origin[j];
        let text = match &origin.category {
            Some(cat) => {
                // tree thresholds on an indicator sit between 0 and 1
                let present = match l.op {
                    Op::Le => false,
                    Op::Gt => true,
                    Op::Eq => v >= 0.5,
                };
                format!("{} {} {}", origin.column, if present { "=" } else { "≠" }, cat)
            }
            None => format!("{} {} {}", fm.feature_names[j], l.op, fmt_num(v)),
        };
        let band = self.scales[j].as_deref().and_then(|s| self.bands.label(s, v)).map(str::to_string);
        Reading { feature: fm.feature_names[j].clone(), text, band }
    }
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryExplanation {
    pub row: usize,
    pub cluster: usize,
    pub attribution: Attribution,
    pub short: ShortExplanation,
    pub formal_reading: Vec<Reading>,
    pub clinical_reading: Vec<Reading>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCount {
    pub feature: String,
    pub count: usize,
    /// Sign of `sum phi_c · sign(x - background mean)` over the cluster's
    /// explanations mentioning the feature, with phi taken toward the cluster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterExplanationSummary {
    pub cluster: usize,
    pub n_explanations: usize,
    /// By decreasing count, then name.
    pub frequency: Vec<FeatureCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryExplanations {
    pub top_n: usize,
    pub background_size: usize,
    pub explanations: Vec<BoundaryExplanation>,
    pub clusters: Vec<ClusterExplanationSummary>,
}

/// One short explanation per delimitation point, plus per-cluster summaries.
pub fn explain_boundary(
    model: &Model,
    ctx: &FeatureContext,
    delimitation: &DelimitationSet,
    background: &Matrix,
) -> Result<BoundaryExplanations> {
    let fm = ctx.features;
    if background.rows() == 0 {
        return Err(Error::invalid("empty SHAP background"));
    }
    let points: Vec<(usize, usize)> = delimitation.rows().map(|(c, p)| (c, p.row)).collect();
    if points.is_empty() {
        return Err(Error::invalid("no delimitation points to explain"));
    }
    let bg_mean = background.column_means();

    let explained: Vec<(BoundaryExplanation, Vec<f64>)> = points
        .par_iter()
        .map(|&(cluster, row)| {
            let x = fm.values.row(row);
            let id = &fm.row_ids[row];
            let cls = model.predict(x);
            let att = shap(model, id, x, background, cls)?;
            let rule = sufficient_reason(model, x, &att.phi)?;
            let short = intersect_explanations(&att, &rule, &fm.feature_names, TOP_N);
            let toward = if cls == cluster { att.phi.clone() } else { shap(model, id, x, background, cluster)?.phi };
            let signed: Vec<f64> = (0..x.len()).map(|j| toward[j] * sign(x[j] - bg_mean[j])).collect();
            let formal_reading = short.formal_rule.literals.iter().map(|l| ctx.read(l)).collect();
            let clinical_reading = short.intersected_rule.literals.iter().map(|l| ctx.read(l)).collect();
            Ok((BoundaryExplanation { row, cluster, attribution: att, short, formal_reading, clinical_reading }, signed))
        })
        .collect::<Result<_>>()?;

    let mut clusters = Vec::new();
    for c in delimitation.clusters.iter().map(|c| c.cluster) {
        let mut count: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        let mut n = 0;
        for (e, signed) in explained.iter().filter(|(e, _)| e.cluster == c) {
            n += 1;
            for f in e.short.intersected_rule.features() {
                let entry = count.entry(f).or_default();
                entry.0 += 1;
                entry.1 += signed[f];
            }
        }
        let mut frequency: Vec<FeatureCount> = count
            .into_iter()
            .map(|(f, (k, s))| FeatureCount { feature: fm.feature_names[f].clone(), count: k, direction: Direction::from_sign(s) })
            .collect();
        frequency.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.feature.cmp(&b.feature)));
        clusters.push(ClusterExplanationSummary { cluster: c, n_explanations: n, frequency });
    }
    Ok(BoundaryExplanations {
        top_n: TOP_N,
        background_size: background.rows(),
        explanations: explained.into_iter().map(|(e, _)| e).collect(),
        clusters,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl BoundaryExplanations {
    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "Short rules keep the formal-rule literals among the {} largest SHAP contributions (background of {} rows).\n\n",
            self.top_n, self.background_size
        );
        for e in &self.explanations {
            let rule: Vec<&str> = e.clinical_reading.iter().map(|r| r.text.as_str()).collect();
            s.push_str(&format!(
                "- **Instance {}** (cluster {}, prédite {}): {}{}.",
                e.attribution.instance,
                e.cluster,
                e.short.class,
                rule.join(" ∧ "),
                if e.short.fallback { " (full formal rule)" } else { "" }
            ));
            let bands: Vec<String> =
                e.clinical_reading.iter().filter_map(|r| r.band.as_ref().map(|b| format!("{}: {b}", r.feature))).collect();
            if !bands.is_empty() {
                s.push_str(&format!(" Lecture clinique: {}.", bands.join("; ")));
            }
            s.push('\n');
        }
        for c in &self.clusters {
            s.push_str(&format!("\n**Cluster {}** ({} explanations)\n\n| Variable | Occurrences | Sens |\n|---|---|---|\n", c.cluster, c.n_explanations));
            for f in &c.frequency {
                let dir = match f.direction {
                    Some(Direction::High) => "élevée",
                    Some(Direction::Low) => "faible",
                    None => "—",
                };
                s.push_str(&format!("| {} | {} | {} |\n", f.feature, f.count, dir));
            }
        }
        s
    }
}
