use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clusterscope::boundary::QuotaBase;
use clusterscope::data::generate_synthetic_cohort;
use clusterscope::pattern::PatternScope;
use clusterscope::pipeline::{self, RunConfig, Source, Stage};
use clusterscope::supervised::ModelKind;
use clusterscope::{seed, Error, Result};

#[derive(Parser)]
#[command(name = "clusterscope", version, about = "Cluster a cohort and characterize the clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write the report.
    Run(Common),
    /// Write a synthetic cohort as CSV.
    Synth(SynthArgs),
    /// Load the data and cluster it.
    Cluster(Common),
    /// Comparative statistical tests.
    Stats(Common),
    /// In-pattern / out-pattern differentiation factors.
    Pattern(Common),
    /// Train, compare and select the classifiers.
    Train(Common),
    /// Select delimitation points.
    Boundary(Common),
    /// Explain the delimitation points.
    Explain(Common),
    /// Assemble the report from existing artifacts.
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Cohort,
    Members,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuotaArg {
    ClusterSize,
    Cohort,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Logistic,
    Tree,
    Forest,
}

#[derive(Args)]
struct Common {
    /// Cohort CSV (needs --schema).
    #[arg(long, conflicts_with = "synth")]
    input: Option<PathBuf>,
    /// Column schema JSON for --input.
    #[arg(long, requires = "input")]
    schema: Option<PathBuf>,
    /// Synthetic cohort: `default` or a generator spec JSON.
    #[arg(long)]
    synth: Option<String>,
    /// Synthetic cohort size override.
    #[arg(long)]
    n_rows: Option<usize>,
    #[arg(long, env = "CLUSTERSCOPE_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    bonferroni: bool,
    #[arg(long, default_value_t = 1.0)]
    z_pattern: f64,
    #[arg(long, default_value_t = 1.0)]
    z_salient: f64,
    /// Differentiation factors on unshifted standardized values.
    #[arg(long)]
    df_raw: bool,
    #[arg(long, value_enum, default_value = "cohort")]
    pattern_scope: ScopeArg,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    /// Delimitation fraction.
    #[arg(long, default_value_t = 0.05)]
    fraction: f64,
    #[arg(long, value_enum, default_value = "cluster-size")]
    quota: QuotaArg,
    #[arg(long, default_value_t = 10)]
    knn_k: usize,
    #[arg(long, default_value_t = 0.65)]
    anomaly_cutoff: f64,
    /// Model kinds to compare (all by default).
    #[arg(long, value_enum, value_delimiter = ',')]
    models: Vec<ModelArg>,
    /// Clinical band table JSON.
    #[arg(long)]
    bands: Option<PathBuf>,
    /// Token marking a missing cell.
    #[arg(long, default_value = "")]
    na_token: String,
    #[arg(long, default_value = "clusterscope-out")]
    out: PathBuf,
    /// Stage to leave out (repeatable): stats, pattern, train, boundary, xai.
    #[arg(long)]
    skip: Vec<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// `default` or a generator spec JSON.
    #[arg(long, default_value = "default")]
    spec: String,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long, env = "CLUSTERSCOPE_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the column schema here.
    #[arg(long)]
    schema_out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let source = match (&self.input, &self.synth) {
            (Some(input), None) => Source::Csv {
                input: input.clone(),
                schema: self.schema.clone().ok_or_else(|| Error::Config("--input needs --schema".into()))?,
                na_token: self.na_token.clone(),
            },
            (None, Some(spec)) => Source::Synth { spec: spec.clone(), n: self.n_rows },
            _ => return Err(Error::Config("give either --input with --schema, or --synth".into())),
        };
        let scope = match self.pattern_scope {
            ScopeArg::Cohort => PatternScope::Cohort,
            ScopeArg::Members => PatternScope::Members,
        };
        let quota = match self.quota {
            QuotaArg::ClusterSize => QuotaBase::ClusterSize,
            QuotaArg::Cohort => QuotaBase::Cohort,
        };
        let mut models: Vec<ModelKind> = self
            .models
            .iter()
            .map(|m| match m {
                ModelArg::Logistic => ModelKind::LogisticRegression,
                ModelArg::Tree => ModelKind::DecisionTree,
                ModelArg::Forest => ModelKind::RandomForest,
            })
            .collect();
        if models.is_empty() {
            models = ModelKind::ALL.to_vec();
        }
        models.sort();
        models.dedup();
        let mut skip = self.skip.iter().map(|s| Stage::parse(s)).collect::<Result<Vec<_>>>()?;
        skip.sort();
        skip.dedup();
        let mut cfg = RunConfig {
            source,
            bands: self.bands.clone(),
            seed: self.seed,
            pattern: pipeline::pattern_options(self.z_pattern, self.z_salient, self.df_raw, scope),
            k_min: self.k_min,
            k_max: self.k_max,
            delimitation: pipeline::delimitation_options(self.fraction, self.knn_k, self.anomaly_cutoff, quota),
            models,
            skip,
            out: self.out.clone(),
            ..RunConfig::default()
        };
        cfg.stats.alpha = self.alpha;
        cfg.stats.bonferroni = self.bonferroni;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = pipeline::load_generator_spec(&a.spec)?;
    if let Some(n) = a.n {
        spec.n = n;
    }
    let d = generate_synthetic_cohort(&spec, seed::derive_named(a.seed, "synth"))?;
    let f = std::fs::File::create(&a.output).map_err(|e| Error::Io { path: a.output.clone(), source: e })?;
    d.write_csv(std::io::BufWriter::new(f))?;
    if let Some(p) = &a.schema_out {
        let s = serde_json::to_string_pretty(&clusterscope::data::Schema::new(d.schema.clone()))?;
        std::fs::write(p, s + "\n").map_err(|e| Error::Io { path: p.clone(), source: e })?;
    }
    eprintln!("wrote {} rows to {}", d.n_rows(), a.output.display());
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    let stage = |c: &Common, s: Stage| -> Result<()> { pipeline::run_stage(&c.config()?, s) };
    match cmd {
        Command::Run(c) => {
            let cfg = c.config()?;
            let r = pipeline::run(&cfg)?;
            eprintln!(
                "K = {}; report written to {}",
                r.clustering.k,
                cfg.path(pipeline::REPORT_MD).display()
            );
            Ok(())
        }
        Command::Synth(a) => synth(&a),
        Command::Cluster(c) => {
            stage(&c, Stage::Data)?;
            stage(&c, Stage::Cluster)
        }
        Command::Stats(c) => stage(&c, Stage::Stats),
        Command::Pattern(c) => stage(&c, Stage::Pattern),
        Command::Train(c) => stage(&c, Stage::Train),
        Command::Boundary(c) => stage(&c, Stage::Boundary),
        Command::Explain(c) => stage(&c, Stage::Xai),
        Command::Report(c) => pipeline::write_report(&c.config()?).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = format!("error: {e}");
            if let Error::Stage { source, .. } = &e {
                let mut src: &dyn std::error::Error = source.as_ref();
                while let Some(next) = src.source() {
                    msg.push_str(&format!(": {next}"));
                    src = next;
                }
            }
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
