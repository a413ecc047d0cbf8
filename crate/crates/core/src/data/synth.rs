//! Synthetic two-profile cohorts shaped like a sleep-clinic follow-up dataset.
//!
//! The default spec mixes an older, well-sleeping, mildly depressed profile
//! with a younger profile showing depression, anxiety, insomnia and
//! irregular, short sleep. Categorical columns and a few numeric ones
//! (BMI, NOSAS) share one distribution across profiles.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Cell, ColumnKind, ColumnSchema, Dataset};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericParams {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub name: String,
    pub weight: f64,
    #[serde(default)]
    pub numeric: BTreeMap<String, NumericParams>,
    /// Category probabilities, in the column's declared category order.
    #[serde(default)]
    pub categorical: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedColumn {
    #[serde(flatten)]
    pub schema: ColumnSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Decimal places kept after sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimals: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    pub columns: Vec<GeneratedColumn>,
    pub profiles: Vec<ProfileSpec>,
}

fn num(name: &str, scale: Option<&str>, min: f64, max: f64, decimals: u32) -> GeneratedColumn {
    let schema = match scale {
        Some(s) => ColumnSchema::clinical(name, s),
        None => ColumnSchema::numeric(name),
    };
    GeneratedColumn { schema, min: Some(min), max: Some(max), decimals: Some(decimals) }
}

fn cat(name: &str, cats: &[&str]) -> GeneratedColumn {
    GeneratedColumn { schema: ColumnSchema::categorical(name, cats), min: None, max: None, decimals: None }
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        // (column, older/regular profile, young/depressed profile), each (mean, std).
        #[rustfmt::skip]
        let numeric: &[(&str, Option<&str>, f64, f64, u32, (f64, f64), (f64, f64))] = &[
            ("AGE",      None,         18.0, 90.0, 0, (56.0, 8.0),   (40.0, 8.0)),
            ("IMC",      Some("BMI"),  15.0, 50.0, 1, (26.0, 4.0),   (26.0, 4.0)),
            ("NOSAS",    None,          0.0, 17.0, 0, (7.0, 3.0),    (7.0, 3.0)),
            ("CRP",      None,          0.0, 30.0, 1, (2.0, 0.8),    (4.0, 0.8)),
            ("ESSV0",    Some("ESS"),   0.0, 24.0, 0, (6.68, 1.6),   (10.25, 1.6)),
            ("ESSV1",    Some("ESS"),   0.0, 24.0, 0, (6.5, 1.6),    (10.5, 1.6)),
            ("ESSV2",    Some("ESS"),   0.0, 24.0, 0, (6.4, 1.6),    (10.3, 1.6)),
            ("ISIV0",    Some("ISI"),   0.0, 28.0, 0, (13.12, 1.6),  (17.44, 1.6)),
            ("ISIV1",    Some("ISI"),   0.0, 28.0, 0, (11.5, 1.6),   (17.0, 1.6)),
            ("ISIV2",    Some("ISI"),   0.0, 28.0, 0, (10.5, 1.6),   (16.5, 1.6)),
            ("DEPV0",    Some("PHQ9"),  0.0, 27.0, 0, (6.07, 2.2),   (13.25, 2.2)),
            ("DEPV1",    Some("PHQ9"),  0.0, 27.0, 0, (5.5, 2.2),    (12.5, 2.2)),
            ("DEPV2",    Some("PHQ9"),  0.0, 27.0, 0, (5.0, 2.2),    (12.0, 2.2)),
            ("ANXV0",    Some("ANX"),   0.0, 6.0,  0, (2.52, 0.7),   (4.51, 0.7)),
            ("ANXV1",    Some("ANX"),   0.0, 6.0,  0, (2.3, 0.7),    (4.6, 0.7)),
            ("ANXV2",    Some("ANX"),   0.0, 6.0,  0, (2.2, 0.7),    (4.5, 0.7)),
            ("SRIV0",    None,          0.0, 100.0, 1, (85.59, 1.8), (81.98, 1.8)),
            ("SRIV1",    None,          0.0, 100.0, 1, (86.0, 1.8),  (80.5, 1.8)),
            ("TSTISDV0", None,          0.0, 6.0,  2, (2.30, 0.25),   (2.87, 0.25)),
            ("TSTISDV1", None,          0.0, 6.0,  2, (2.2, 0.25),    (2.95, 0.25)),
            ("MIDISDV0", None,          0.0, 6.0,  2, (1.53, 0.2),  (1.99, 0.2)),
            ("MIDISDV1", None,          0.0, 6.0,  2, (1.5, 0.2),   (2.05, 0.2)),
            ("TSTV0",    None,          2.0, 12.0, 2, (7.1, 0.45),   (6.2, 0.45)),
            ("TSTV1",    None,          2.0, 12.0, 2, (7.2, 0.45),   (6.1, 0.45)),
            ("BEDV0",    None,         18.0, 30.0, 2, (22.9, 0.4),   (23.6, 0.4)),
            ("BEDV1",    None,         18.0, 30.0, 2, (22.9, 0.4),   (23.7, 0.4)),
            ("WAKEV0",   None,          3.0, 13.0, 2, (7.0, 0.4),    (7.7, 0.4)),
            ("WAKEV1",   None,          3.0, 13.0, 2, (7.0, 0.4),    (7.8, 0.4)),
            ("MIDV0",    None,          0.0, 8.0,  2, (3.0, 0.35),    (3.6, 0.35)),
            ("MIDV1",    None,          0.0, 8.0,  2, (3.0, 0.35),    (3.7, 0.35)),
        ];
        #[rustfmt::skip]
        let categorical: &[(&str, &[&str], &[f64])] = &[
            ("sexe",         &["F", "M"],                                              &[0.6, 0.4]),
            ("region",       &["Nouvelle-Aquitaine", "Occitanie", "Ile-de-France"],    &[0.5, 0.25, 0.25]),
            ("departement",  &["33", "24", "autre"],                                   &[0.5, 0.2, 0.3]),
            ("CSP",          &["cadre", "employe", "retraite", "autre"],               &[0.3, 0.35, 0.15, 0.2]),
            ("niveau_etude", &["bac", "licence", "master_plus"],                       &[0.3, 0.35, 0.35]),
            ("SAOS",         &["non", "oui"],                                          &[0.8, 0.2]),
            ("SJSR",         &["non", "oui"],                                          &[0.85, 0.15]),
        ];

        let mut columns = Vec::new();
        let mut older = ProfileSpec {
            name: "older_regular".into(),
            weight: 0.5,
            numeric: BTreeMap::new(),
            categorical: BTreeMap::new(),
        };
        let mut young = ProfileSpec { name: "young_depressed".into(), ..older.clone() };
        for &(name, scale, min, max, dec, a, b) in numeric {
            columns.push(num(name, scale, min, max, dec));
            older.numeric.insert(name.into(), NumericParams { mean: a.0, std: a.1 });
            young.numeric.insert(name.into(), NumericParams { mean: b.0, std: b.1 });
        }
        for &(name, cats, probs) in categorical {
            columns.push(cat(name, cats));
            older.categorical.insert(name.into(), probs.to_vec());
            young.categorical.insert(name.into(), probs.to_vec());
        }
        GeneratorSpec { n: 145, columns, profiles: vec![older, young] }
    }
}

impl GeneratorSpec {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn schema(&self) -> Vec<ColumnSchema> {
        self.columns.iter().map(|c| c.schema.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        super::Schema::new(self.schema()).validate()?;
        if self.profiles.is_empty() {
            return Err(Error::Config("generator spec declares no profiles".into()));
        }
        let total: f64 = self.profiles.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-9 || self.profiles.iter().any(|p| !(p.weight >= 0.0)) {
            return Err(Error::Config(format!("profile weights must be non-negative and sum to 1, got {total}")));
        }
        for p in &self.profiles {
            for c in &self.columns {
                match c.schema.kind {
                    ColumnKind::Numeric => {
                        let params = p.numeric.get(&c.schema.name).ok_or_else(|| {
                            Error::Config(format!("profile `{}` has no parameters for `{}`", p.name, c.schema.name))
                        })?;
                        if !(params.std >= 0.0) || !params.mean.is_finite() {
                            return Err(Error::Config(format!("bad parameters for `{}`", c.schema.name)));
                        }
                    }
                    ColumnKind::Categorical => {
                        let probs = p.categorical.get(&c.schema.name).ok_or_else(|| {
                            Error::Config(format!("profile `{}` has no probabilities for `{}`", p.name, c.schema.name))
                        })?;
                        let s: f64 = probs.iter().sum();
                        if probs.len() != c.schema.categories.len()
                            || (s - 1.0).abs() > 1e-9
                            || probs.iter().any(|&q| q < 0.0)
                        {
                            return Err(Error::Config(format!(
                                "profile `{}`: probabilities for `{}` must match its categories and sum to 1",
                                p.name, c.schema.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Exact per-profile row counts by largest remainder.
    fn profile_counts(&self) -> Vec<usize> {
        let raw: Vec<f64> = self.profiles.iter().map(|p| p.weight * self.n as f64).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
        let mut left = self.n - counts.iter().sum::<usize>();
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}

/// A generated cohort together with each row's generating profile.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub dataset: Dataset,
    pub profile: Vec<usize>,
}

pub fn generate_synthetic_cohort(spec: &GeneratorSpec, seed: u64) -> Result<Dataset> {
    Ok(generate_labeled(spec, seed)?.dataset)
}

pub fn generate_labeled(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticCohort> {
    spec.validate()?;
    let mut rng = seed::rng(seed);
    let mut profile: Vec<usize> =
        spec.profile_counts().iter().enumerate().flat_map(|(p, &c)| std::iter::repeat_n(p, c)).collect();
    profile.shuffle(&mut rng);

    let mut rows = Vec::with_capacity(spec.n);
    for &p in &profile {
        let prof = &spec.profiles[p];
        let mut row = Vec::with_capacity(spec.columns.len());
        for col in &spec.columns {
            let cell = match col.schema.kind {
                ColumnKind::Numeric => {
                    let params = prof.numeric[&col.schema.name];
                    let mut x = if params.std > 0.0 {
                        Normal::new(params.mean, params.std)
                            .map_err(|e| Error::Config(e.to_string()))?
                            .sample(&mut rng)
                    } else {
                        params.mean
                    };
                    if let Some(d) = col.decimals {
                        let f = 10f64.powi(d as i32);
                        x = (x * f).round() / f;
                    }
                    if let Some(lo) = col.min {
                        x = x.max(lo);
                    }
                    if let Some(hi) = col.max {
                        x = x.min(hi);
                    }
                    Cell::Number(x)
                }
                ColumnKind::Categorical => {
                    let probs = &prof.categorical[&col.schema.name];
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = probs.len() - 1;
                    for (i, q) in probs.iter().enumerate() {
                        acc += q;
                        if u < acc {
                            pick = i;
                            break;
                        }
                    }
                    Cell::Category(pick as u32)
                }
            };
            row.push(Some(cell));
        }
        rows.push(row);
    }
    let ids = (1..=spec.n).map(|i| format!("P{i:04}")).collect();
    Ok(SyntheticCohort { dataset: Dataset::new(spec.schema(), rows, ids)?, profile })
}
