//! End-to-end runs over plain-file stage artifacts.
//!
//! Every stage reads its inputs from, and writes its outputs to, the output
//! directory, so each one can be re-run on its own.

mod report;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::boundary::{select_delimitation, DelimitationOptions, DelimitationSet, QuotaBase};
use crate::cluster::{pca_project, select_k, Clustering, KSelection};
use crate::data::{
    complete_case_filter, generate_synthetic_cohort, load_csv, to_feature_matrix, ClinicalBands, CsvOptions, Dataset,
    FeatureMatrix, GeneratorSpec, Schema,
};
use crate::error::{Error, Result};
use crate::pattern::{characterize_by_patterns, PatternOptions, PatternReport, PatternScope};
use crate::seed;
use crate::stats::{characterize_by_tests, StatsOptions, StatsProfile};
use crate::supervised::{compare_models, Model, ModelComparison, ModelKind};
use crate::xai::{background_rows, explain_boundary, BoundaryExplanations, FeatureContext, BACKGROUND_CAP};

pub use report::{assemble_report, Bilan, Conflict, Consistency, MethodDirections, RunReport, Section};

pub const CONFIG: &str = "config.json";
pub const DATASET: &str = "dataset.csv";
pub const SCHEMA: &str = "schema.json";
pub const FEATURES: &str = "features.json";
pub const DATA_SUMMARY: &str = "data.json";
pub const CLUSTERING: &str = "clustering.json";
pub const STATS: &str = "stats.json";
pub const PATTERN: &str = "pattern.json";
pub const MODEL: &str = "model.json";
pub const MODELS: &str = "models.json";
pub const DELIMITATION: &str = "delimitation.json";
pub const EXPLANATIONS: &str = "explanations.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    /// `spec` is `default` or a path to a generator spec JSON.
    Synth { spec: String, n: Option<usize> },
    Csv { input: PathBuf, schema: PathBuf, na_token: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Data,
    Cluster,
    Stats,
    Pattern,
    Train,
    Boundary,
    Xai,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Data => "data",
            Stage::Cluster => "cluster",
            Stage::Stats => "stats",
            Stage::Pattern => "pattern",
            Stage::Train => "train",
            Stage::Boundary => "boundary",
            Stage::Xai => "xai",
        }
    }

    pub fn parse(s: &str) -> Result<Stage> {
        Ok(match s {
            "data" => Stage::Data,
            "cluster" => Stage::Cluster,
            "stats" => Stage::Stats,
            "pattern" => Stage::Pattern,
            "train" | "supervised" => Stage::Train,
            "boundary" => Stage::Boundary,
            "xai" | "explain" => Stage::Xai,
            other => return Err(Error::Config(format!("unknown stage `{other}`"))),
        })
    }

    /// Stages whose artifacts this one reads.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Data => &[],
            Stage::Cluster => &[Stage::Data],
            Stage::Stats | Stage::Pattern | Stage::Train => &[Stage::Cluster],
            Stage::Boundary => &[Stage::Cluster],
            Stage::Xai => &[Stage::Train, Stage::Boundary],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: Source,
    /// Clinical band table; the built-in table when absent.
    pub bands: Option<PathBuf>,
    pub seed: u64,
    pub stats: StatsOptions,
    pub pattern: PatternOptions,
    pub k_min: usize,
    pub k_max: usize,
    pub delimitation: DelimitationOptions,
    pub train_fraction: f64,
    pub models: Vec<ModelKind>,
    pub skip: Vec<Stage>,
    /// Not serialized: the configuration is stored inside this directory.
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: Source::Synth { spec: "default".into(), n: None },
            bands: None,
            seed: 42,
            stats: StatsOptions::default(),
            pattern: PatternOptions::default(),
            k_min: 2,
            k_max: 8,
            delimitation: DelimitationOptions::default(),
            train_fraction: 0.75,
            models: ModelKind::ALL.to_vec(),
            skip: vec![],
            out: PathBuf::from("clusterscope-out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.stats.alpha > 0.0 && self.stats.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.stats.alpha));
        }
        if !(self.pattern.z_pattern > 0.0 && self.pattern.z_salient > 0.0) {
            return bad("z parameters must be positive".into());
        }
        if self.pattern.shift.is_some_and(|s| !(s > 0.0)) {
            return bad("the differentiation shift must be positive".into());
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return bad(format!("k range {}..{} is invalid (need 2 ≤ k_min ≤ k_max)", self.k_min, self.k_max));
        }
        let dl = &self.delimitation;
        if !(dl.fraction > 0.0 && dl.fraction <= 0.5) {
            return bad(format!("delimitation fraction must lie in (0, 0.5], got {}", dl.fraction));
        }
        if dl.knn_k == 0 {
            return bad("knn_k must be positive".into());
        }
        if !(dl.anomaly_cutoff > 0.0 && dl.anomaly_cutoff <= 1.0) {
            return bad("anomaly cutoff must lie in (0, 1]".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie in (0, 1)".into());
        }
        if self.models.is_empty() {
            return bad("no model kind enabled".into());
        }
        if self.skip.contains(&Stage::Data) || self.skip.contains(&Stage::Cluster) {
            return bad("the data and cluster stages cannot be skipped".into());
        }
        if let Source::Synth { n: Some(0), .. } = self.source {
            return bad("synthetic cohort size must be positive".into());
        }
        Ok(())
    }

    pub fn path(&self, artifact: &str) -> PathBuf {
        self.out.join(artifact)
    }

    pub fn load_bands(&self) -> Result<ClinicalBands> {
        let bands = match &self.bands {
            None => ClinicalBands::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)?
            }
        };
        bands.validate()?;
        Ok(bands)
    }

    /// Whether the stage runs: neither skipped nor downstream of a skip.
    pub fn enabled(&self, stage: Stage) -> bool {
        !self.skip.contains(&stage) && stage.requires().iter().all(|&s| self.enabled(s))
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_artifact<T: DeserializeOwned>(cfg: &RunConfig, name: &str) -> Result<T> {
    let path = cfg.path(name);
    if !path.exists() {
        return Err(Error::MissingArtifact(name.into()));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_generator_spec(spec: &str) -> Result<GeneratorSpec> {
    let g = if spec == "default" { GeneratorSpec::default() } else { GeneratorSpec::load(Path::new(spec))? };
    g.validate()?;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n_input_rows: usize,
    pub n_complete_rows: usize,
    pub n_columns: usize,
    pub n_features: usize,
    pub dropped_features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub selection: KSelection,
    pub clustering: Clustering,
    pub explained_variance_ratio: [f64; 2],
    /// Row id and first two principal coordinates.
    pub pca: Vec<(String, [f64; 2])>,
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_json(&cfg.path(CONFIG), cfg)
}

pub fn stage_data(cfg: &RunConfig) -> Result<(Dataset, FeatureMatrix)> {
    prepare_out(cfg)?;
    let raw = match &cfg.source {
        Source::Synth { spec, n } => {
            let mut g = load_generator_spec(spec)?;
            if let Some(n) = n {
                g.n = *n;
            }
            generate_synthetic_cohort(&g, seed::derive_named(cfg.seed, "synth"))?
        }
        Source::Csv { input, schema, na_token } => {
            let schema = Schema::load(schema)?;
            load_csv(input, &schema, &CsvOptions { na_token: na_token.clone() })?
        }
    };
    let data = complete_case_filter(&raw)?;
    let fm = to_feature_matrix(&data)?;
    let file = std::fs::File::create(cfg.path(DATASET)).map_err(|e| Error::io(cfg.path(DATASET), e))?;
    data.write_csv(std::io::BufWriter::new(file))?;
    write_json(&cfg.path(SCHEMA), &Schema::new(data.schema.clone()))?;
    write_json(&cfg.path(FEATURES), &fm)?;
    let summary = DataSummary {
        n_input_rows: raw.n_rows(),
        n_complete_rows: data.n_rows(),
        n_columns: data.n_cols(),
        n_features: fm.d(),
        dropped_features: fm.dropped.clone(),
    };
    write_json(&cfg.path(DATA_SUMMARY), &summary)?;
    Ok((data, fm))
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let schema: Schema = read_artifact(cfg, SCHEMA)?;
    if !cfg.path(DATASET).exists() {
        return Err(Error::MissingArtifact(DATASET.into()));
    }
    load_csv(&cfg.path(DATASET), &schema, &CsvOptions::default())
}

pub fn stage_cluster(cfg: &RunConfig) -> Result<ClusterArtifact> {
    let fm: FeatureMatrix = read_artifact(cfg, FEATURES)?;
    let (selection, clustering) = select_k(&fm, cfg.k_min, cfg.k_max, seed::derive_named(cfg.seed, "kmeans"))?;
    let pca = pca_project(&fm)?;
    let art = ClusterArtifact {
        selection,
        clustering,
        explained_variance_ratio: pca.explained_variance_ratio,
        pca: (0..fm.n()).map(|i| (fm.row_ids[i].clone(), [pca.coordinates.get(i, 0), pca.coordinates.get(i, 1)])).collect(),
    };
    write_json(&cfg.path(CLUSTERING), &art)?;
    Ok(art)
}

fn labels(cfg: &RunConfig) -> Result<Vec<usize>> {
    Ok(read_artifact::<ClusterArtifact>(cfg, CLUSTERING)?.clustering.labels)
}

pub fn stage_stats(cfg: &RunConfig) -> Result<StatsProfile> {
    let labels = labels(cfg)?;
    let data = load_dataset(cfg)?;
    let profile = characterize_by_tests(&data, &labels, &cfg.stats, &cfg.load_bands()?)?;
    write_json(&cfg.path(STATS), &profile)?;
    Ok(profile)
}

pub fn stage_pattern(cfg: &RunConfig) -> Result<PatternReport> {
    let labels = labels(cfg)?;
    let fm: FeatureMatrix = read_artifact(cfg, FEATURES)?;
    let r = characterize_by_patterns(&fm, &labels, &cfg.pattern)?;
    write_json(&cfg.path(PATTERN), &r)?;
    Ok(r)
}

pub fn stage_train(cfg: &RunConfig) -> Result<(ModelComparison, Model)> {
    let labels = labels(cfg)?;
    let fm: FeatureMatrix = read_artifact(cfg, FEATURES)?;
    let (cmp, model) = compare_models(
        &fm.values,
        &labels,
        &fm.feature_names,
        &cfg.models,
        cfg.train_fraction,
        seed::derive_named(cfg.seed, "supervised"),
    )?;
    write_json(&cfg.path(MODELS), &cmp)?;
    model.save(&cfg.path(MODEL))?;
    Ok((cmp, model))
}

pub fn stage_boundary(cfg: &RunConfig) -> Result<DelimitationSet> {
    let labels = labels(cfg)?;
    let fm: FeatureMatrix = read_artifact(cfg, FEATURES)?;
    let set = select_delimitation(&fm, &labels, &cfg.delimitation, seed::derive_named(cfg.seed, "boundary"))?;
    write_json(&cfg.path(DELIMITATION), &set)?;
    Ok(set)
}

pub fn stage_explain(cfg: &RunConfig) -> Result<BoundaryExplanations> {
    if !cfg.path(MODEL).exists() {
        return Err(Error::MissingArtifact(MODEL.into()));
    }
    let model = Model::load(&cfg.path(MODEL))?;
    let cmp: ModelComparison = read_artifact(cfg, MODELS)?;
    let set: DelimitationSet = read_artifact(cfg, DELIMITATION)?;
    let fm: FeatureMatrix = read_artifact(cfg, FEATURES)?;
    let schema: Schema = read_artifact(cfg, SCHEMA)?;
    let bands = cfg.load_bands()?;
    let bg = background_rows(&cmp.split.train, BACKGROUND_CAP, seed::derive_named(cfg.seed, "background"));
    let ctx = FeatureContext::new(&fm, &schema.columns, &bands);
    let ex = explain_boundary(&model, &ctx, &set, &fm.values.select_rows(&bg))?;
    write_json(&cfg.path(EXPLANATIONS), &ex)?;
    Ok(ex)
}

/// Runs one stage, tagging failures with its name.
pub fn run_stage(cfg: &RunConfig, stage: Stage) -> Result<()> {
    cfg.validate()?;
    let r = match stage {
        Stage::Data => stage_data(cfg).map(drop),
        Stage::Cluster => stage_cluster(cfg).map(drop),
        Stage::Stats => stage_stats(cfg).map(drop),
        Stage::Pattern => stage_pattern(cfg).map(drop),
        Stage::Train => stage_train(cfg).map(drop),
        Stage::Boundary => stage_boundary(cfg).map(drop),
        Stage::Xai => stage_explain(cfg).map(drop),
    };
    r.map_err(|e| e.in_stage(stage.name()))
}

/// Full pipeline; writes every artifact plus `report.json` and `report.md`.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    for stage in [Stage::Data, Stage::Cluster, Stage::Stats, Stage::Pattern, Stage::Train, Stage::Boundary, Stage::Xai] {
        if cfg.enabled(stage) {
            run_stage(cfg, stage)?;
        } else {
            // stale artifacts from an earlier run must not leak into the report
            for name in artifacts_of(stage) {
                let p = cfg.path(name);
                if p.exists() {
                    std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
                }
            }
        }
    }
    write_report(cfg)
}

fn artifacts_of(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::Data => &[DATASET, SCHEMA, FEATURES, DATA_SUMMARY],
        Stage::Cluster => &[CLUSTERING],
        Stage::Stats => &[STATS],
        Stage::Pattern => &[PATTERN],
        Stage::Train => &[MODELS, MODEL],
        Stage::Boundary => &[DELIMITATION],
        Stage::Xai => &[EXPLANATIONS],
    }
}

/// Assembles the report from whatever artifacts exist and writes it.
pub fn write_report(cfg: &RunConfig) -> Result<RunReport> {
    let report = assemble_report(cfg).map_err(|e| e.in_stage("report"))?;
    write_json(&cfg.path(REPORT_JSON), &report)?;
    let md = report.to_markdown();
    std::fs::write(cfg.path(REPORT_MD), md).map_err(|e| Error::io(cfg.path(REPORT_MD), e))?;
    Ok(report)
}

/// Config values that depend on user-facing switches.
pub fn pattern_options(z_pattern: f64, z_salient: f64, df_raw: bool, scope: PatternScope) -> PatternOptions {
    PatternOptions { z_pattern, z_salient, shift: if df_raw { None } else { PatternOptions::default().shift }, scope }
}

pub fn delimitation_options(fraction: f64, knn_k: usize, anomaly_cutoff: f64, quota: QuotaBase) -> DelimitationOptions {
    DelimitationOptions { fraction, knn_k, anomaly_cutoff, quota, ..Default::default() }
}
