//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fairshift_core::experiment::{evaluate, ExperimentConfig, ModelMetrics};
use fairshift_core::fairness::EodVariant;
use fairshift_core::importance::{ImportanceReport, PredictiveMetric};
use fairshift_core::logistic::{predict_proba, train_performance_model, TrainSummary};
use fairshift_core::preprocess::{filter_interpercentile, standardize, ScalerParams};
use fairshift_core::roc::{er_threshold, roc_curve};
use fairshift_core::shap::{linear_shap, ShapReport};
use fairshift_core::synth::{generate_synthetic, CohortSpec};
use fairshift_core::transfer::{train_fair_model, FairTransfer, TransferCheck, TransferSummary};
use fairshift_core::{CoefficientDelta, Dataset, ModelWeights};
use serde::{Deserialize, Serialize};

use crate::io::{self, CsvOptions, CsvSchema, DropCounts};
use crate::manifest::{Artifact, RunManifest};
use crate::parallel;
use crate::report;
use crate::synth_presets::Preset;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NON_IMPROVING: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fairshift", version, about = "Fairness-aware transfer of logistic risk models")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a raw cohort, binarize race, filter outliers and write a clean CSV.
    Prepare(PrepareArgs),
    /// Generate a synthetic cohort CSV.
    Synth(SynthArgs),
    /// Train the performance-optimized model.
    Train(TrainArgs),
    /// Fine-tune a fair model from a trained performance model.
    Transfer(TransferArgs),
    /// Fairness and discrimination metrics of a model on a cohort.
    Audit(AuditArgs),
    /// Permutation fairness/predictive importance or linear SHAP.
    Importance(ImportanceArgs),
    /// Full cross-validated pipeline.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Cohort CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Column-role JSON; defaults to the clean layout (features, `label`, `group`).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    /// Race alias JSON used when the group column holds raw strings.
    #[arg(long)]
    pub aliases: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Lower quantile of the outlier filter.
    #[arg(long, default_value_t = 0.02)]
    pub low: f64,
    #[arg(long, default_value_t = 0.98)]
    pub high: f64,
    /// Skip the interpercentile filter.
    #[arg(long, conflicts_with_all = ["low", "high"])]
    pub no_filter: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// CohortSpec JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Row count for a preset.
    #[arg(long, default_value_t = 10_000, conflicts_with = "spec")]
    pub n: usize,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment configuration JSON; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fine-tuning epochs of the fair model.
    #[arg(long)]
    pub transfer_epochs: Option<usize>,
    #[arg(long, value_enum)]
    pub eod_variant: Option<VariantArg>,
    /// Fit models on raw feature units.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    SquaredSum,
    MeanAbs,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg: ExperimentConfig = match &self.config {
            Some(p) => io::read_json(p)?,
            None => ExperimentConfig::default(),
        };
        let t = &mut cfg.transfer;
        if let Some(v) = self.epsilon {
            t.epsilon = v;
        }
        if let Some(v) = self.tau {
            t.surrogate_temperature = v;
        }
        if let Some(v) = self.lambda {
            t.penalty_weight = v;
        }
        if let Some(v) = self.transfer_epochs {
            t.max_epochs = v;
        }
        if let Some(v) = self.eod_variant {
            t.eod_variant = match v {
                VariantArg::SquaredSum => EodVariant::SquaredSum,
                VariantArg::MeanAbs => EodVariant::MeanAbs,
            };
        }
        if self.no_standardize {
            cfg.standardize = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Performance model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Coefficient changes as CSV.
    #[arg(long)]
    pub deltas_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub roc_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Fairness,
    Predictive,
    Shap,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Auc,
    Acc,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Performance model (or the explained model for predictive/shap).
    #[arg(long)]
    pub model: PathBuf,
    /// Fair model, required by `--mode fairness`.
    #[arg(long)]
    pub fair: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fairness")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "auc")]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 100)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Directory receiving report.json, metrics.csv, importance.csv and
    /// coefficients.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// A model file as written by `train` and `transfer`. Models act on features
/// transformed by `scaler`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: ModelWeights,
    pub scaler: ScalerParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferBlock {
    #[serde(flatten)]
    pub summary: TransferSummary,
    pub check: TransferCheck,
    pub passed: bool,
    pub coefficient_delta: CoefficientDelta,
}

#[derive(Debug, Serialize)]
struct PrepareBody<'a> {
    rows_in: usize,
    rows_out: usize,
    dropped: DropCounts,
    filtered: usize,
    bounds: &'a [Option<(f64, f64)>],
}

#[derive(Debug, Serialize)]
struct AuditBody {
    model: ModelMetrics,
    threshold: f64,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum ImportanceBody {
    Permutation { importance: ImportanceReport },
    Shap { shap: ShapReport },
}

/// Marks an error as a command-line usage problem (exit code 1).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

enum Outcome {
    Done,
    NonImproving,
}

fn csv_options(a: &DataArgs) -> anyhow::Result<CsvOptions> {
    if !a.delimiter.is_ascii() {
        return Err(UsageError(format!("delimiter '{}' must be a single ASCII character", a.delimiter)).into());
    }
    let mut opts = CsvOptions {
        delimiter: a.delimiter as u8,
        ..CsvOptions::default()
    };
    if let Some(p) = &a.aliases {
        opts.aliases = io::load_race_aliases(p)?;
    }
    Ok(opts)
}

fn load(a: &DataArgs) -> anyhow::Result<io::LoadedCsv> {
    let schema = a.schema.as_deref().map(CsvSchema::from_file).transpose()?;
    let loaded = io::load_csv(&a.data, schema.as_ref(), &csv_options(a)?)?;
    log::info!(
        "loaded {} rows from {} ({} dropped for missing values, {} for unknown race)",
        loaded.dataset.n_rows(),
        a.data.display(),
        loaded.dropped.missing,
        loaded.dropped.race_rejected
    );
    Ok(loaded)
}

fn manifest(cmd: &str, seed: u64, data: &DataArgs, config: Option<&Path>) -> anyhow::Result<RunManifest> {
    let mut m = RunManifest::new(cmd, seed).with_config(config)?.with_input(&data.data)?;
    if let Some(s) = &data.schema {
        m = m.with_input(s)?;
    }
    if let Some(s) = &data.aliases {
        m = m.with_input(s)?;
    }
    Ok(m)
}

fn read_model(path: &Path) -> anyhow::Result<ModelFile> {
    let a: Artifact<ModelFile> = io::read_json(path)?;
    a.body.model.validate()?;
    Ok(a.body)
}

fn scaled(d: &Dataset, scaler: &ScalerParams) -> anyhow::Result<Dataset> {
    Ok(standardize(d, Some(scaler), &[])?.0)
}

fn prepare(a: &PrepareArgs) -> anyhow::Result<Outcome> {
    let opts = csv_options(&a.data)?;
    let schema = match &a.data.schema {
        Some(p) => CsvSchema::from_file(p)?,
        None => return Err(UsageError("prepare needs --schema to map raw columns".into()).into()),
    };
    let loaded = io::load_csv(&a.data.data, Some(&schema), &opts)?;
    let d = &loaded.dataset;
    let (out, filtered, bounds) = if a.no_filter {
        (d.clone(), 0, Vec::new())
    } else {
        let mut exempt = loaded.binary.clone();
        exempt.extend(d.binary_columns());
        exempt.sort_unstable();
        exempt.dedup();
        let f = filter_interpercentile(d, a.low, a.high, &exempt)?;
        (f.dataset, f.removed, f.bounds)
    };
    let m = manifest("prepare", 0, &a.data, None)?;
    io::write_dataset_csv(&a.output, &out, &m)?;
    let body = PrepareBody {
        rows_in: d.n_rows() + loaded.dropped.missing + loaded.dropped.race_rejected,
        rows_out: out.n_rows(),
        dropped: loaded.dropped,
        filtered,
        bounds: &bounds,
    };
    io::write_json(&a.output.with_extension("json"), &Artifact::new(m, body))?;
    Ok(Outcome::Done)
}

fn synth(a: &SynthArgs) -> anyhow::Result<Outcome> {
    let mut spec: CohortSpec = match (&a.spec, a.preset) {
        (Some(p), _) => io::read_json(p)?,
        (None, Some(preset)) => preset.spec(a.n, a.seed.unwrap_or(0)),
        (None, None) => return Err(UsageError("one of --spec or --preset is required".into()).into()),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let d = generate_synthetic(&spec)?;
    let mut m = RunManifest::new("synth", spec.seed).with_config(a.spec.as_deref())?;
    if let Some(p) = &a.spec {
        m = m.with_input(p)?;
    }
    io::write_dataset_csv(&a.output, &d, &m)?;
    io::write_json(&a.output.with_extension("json"), &Artifact::new(m, spec))?;
    Ok(Outcome::Done)
}

fn fit_scaler(d: &Dataset, standardize_features: bool) -> anyhow::Result<ScalerParams> {
    Ok(if standardize_features {
        ScalerParams::fit(d, &d.binary_columns())?
    } else {
        ScalerParams::identity(d.n_features())
    })
}

fn train(a: &TrainArgs) -> anyhow::Result<Outcome> {
    let cfg = a.config.load()?;
    let d = load(&a.data)?.dataset;
    let scaler = fit_scaler(&d, cfg.standardize)?;
    let ds = scaled(&d, &scaler)?;
    let (mut model, summary) = train_performance_model(&ds, &cfg.train)?;
    let p = predict_proba(&model, ds.features())?;
    model.set_threshold(er_threshold(&roc_curve(&p, ds.labels())?))?;
    let m = manifest("train", a.config.seed, &a.data, a.config.config.as_deref())?;
    let body = ModelFile {
        model,
        scaler,
        training: Some(summary),
        transfer: None,
    };
    io::write_json(&a.output, &Artifact::new(m, body))?;
    Ok(Outcome::Done)
}

fn transfer(a: &TransferArgs) -> anyhow::Result<Outcome> {
    let cfg = a.config.load()?;
    let d = load(&a.data)?.dataset;
    let perf = read_model(&a.model)?;
    let ds = scaled(&d, &perf.scaler)?;
    let (outcome, passed): (FairTransfer, bool) = match train_fair_model(&ds, &perf.model, &cfg.transfer) {
        Ok(t) => (t, true),
        Err(fairshift_core::Error::NonImproving(t)) => (*t, false),
        Err(e) => return Err(e.into()),
    };
    let m = manifest("transfer", a.config.seed, &a.data, a.config.config.as_deref())?.with_input(&a.model)?;
    if let Some(p) = &a.deltas_csv {
        report::write_delta_csv(p, &outcome.delta, &m)?;
    }
    let body = ModelFile {
        model: outcome.weights,
        scaler: perf.scaler,
        training: None,
        transfer: Some(TransferBlock {
            summary: outcome.summary,
            check: outcome.check.clone(),
            passed,
            coefficient_delta: outcome.delta,
        }),
    };
    io::write_json(&a.output, &Artifact::new(m, body))?;
    if passed {
        Ok(Outcome::Done)
    } else {
        let c = &outcome.check;
        log::error!(
            "fair model did not improve: eod {} vs {}, tpr {} vs anchor {}",
            c.eod_fair,
            c.eod_perf,
            c.tpr_fair,
            c.tpr_anchor
        );
        Ok(Outcome::NonImproving)
    }
}

fn audit(a: &AuditArgs) -> anyhow::Result<Outcome> {
    let d = load(&a.data)?.dataset;
    let mf = read_model(&a.model)?;
    let ds = scaled(&d, &mf.scaler)?;
    let metrics = evaluate(&mf.model, &ds)?;
    let m = manifest("audit", 0, &a.data, None)?.with_input(&a.model)?;
    if let Some(p) = &a.roc_csv {
        let probs = predict_proba(&mf.model, ds.features())?;
        report::write_roc_csv(p, &roc_curve(&probs, ds.labels())?, &m)?;
    }
    let body = AuditBody {
        threshold: mf.model.threshold()?,
        model: metrics,
    };
    io::write_json(&a.output, &Artifact::new(m, body))?;
    Ok(Outcome::Done)
}

fn importance(a: &ImportanceArgs) -> anyhow::Result<Outcome> {
    if a.mode == Mode::Fairness && a.fair.is_none() {
        return Err(UsageError("--mode fairness requires --fair".into()).into());
    }
    if a.mode != Mode::Shap && a.repetitions == 0 {
        return Err(UsageError("--repetitions must be at least 1".into()).into());
    }
    let d = load(&a.data)?.dataset;
    let lg = read_model(&a.model)?;
    let ds = scaled(&d, &lg.scaler)?;
    let mut m = manifest("importance", a.seed, &a.data, None)?.with_input(&a.model)?;
    let body = match a.mode {
        Mode::Fairness => {
            let fair_path = a.fair.as_deref().expect("checked above");
            let fair = read_model(fair_path)?;
            m = m.with_input(fair_path)?;
            if fair.scaler != lg.scaler {
                bail!("the two models were fitted with different feature scalers");
            }
            let r = parallel::with_pool(|| {
                parallel::fairness_importance(
                    ds.features(),
                    ds.labels(),
                    ds.group(),
                    &lg.model,
                    &fair.model,
                    a.repetitions,
                    a.seed,
                )
            })??;
            ImportanceBody::Permutation { importance: r }
        }
        Mode::Predictive => {
            let metric = match a.metric {
                MetricArg::Auc => PredictiveMetric::Auc,
                MetricArg::Acc => PredictiveMetric::Acc,
            };
            let r = parallel::with_pool(|| {
                parallel::predictive_importance(ds.features(), ds.labels(), &lg.model, metric, a.repetitions, a.seed)
            })??;
            ImportanceBody::Permutation { importance: r }
        }
        Mode::Shap => ImportanceBody::Shap {
            shap: linear_shap(&lg.model, ds.features(), ds.features())?,
        },
    };
    if let Some(p) = &a.csv {
        match &body {
            ImportanceBody::Permutation { importance } => report::write_importance_csv(p, importance, &m)?,
            ImportanceBody::Shap { shap } => report::write_shap_csv(p, shap, &m)?,
        }
    }
    io::write_json(&a.output, &Artifact::new(m, body))?;
    Ok(Outcome::Done)
}

fn experiment(a: &ExperimentArgs) -> anyhow::Result<Outcome> {
    let mut cfg = a.config.load()?;
    if let Some(k) = a.folds {
        cfg.folds = k;
    }
    if let Some(j) = a.repetitions {
        cfg.repetitions = j;
    }
    cfg.validate()?;
    let d = load(&a.data)?.dataset;
    let seed = a.config.seed;
    let r = parallel::with_pool(|| parallel::run_experiment(&d, &cfg, seed))??;
    for w in &r.warnings {
        log::warn!("{w}");
    }
    let m = manifest("experiment", seed, &a.data, a.config.config.as_deref())?;
    let dir = io::ensure_dir(&a.out_dir)?;
    report::write_metrics_csv(&dir.join("metrics.csv"), &r, &m)?;
    report::write_experiment_importance_csv(&dir.join("importance.csv"), &r, &m)?;
    report::write_experiment_coefficients_csv(&dir.join("coefficients.csv"), &r, &m)?;
    io::write_json(&dir.join("report.json"), &Artifact::new(m, r))?;
    Ok(Outcome::Done)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("FAIRSHIFT_LOG")
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Transfer(a) => transfer(a),
        Command::Audit(a) => audit(a),
        Command::Importance(a) => importance(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::NonImproving) => EXIT_NON_IMPROVING,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(["fairshift", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["fairshift", "train", "--data", "x.csv", "--output", "m.json", "--nope"]), EXIT_USAGE);
        assert_eq!(
            run(["fairshift", "synth", "--preset", "biased", "--spec", "s.json", "--output", "o.csv"]),
            EXIT_USAGE
        );
        assert_eq!(run(["fairshift", "--help"]), EXIT_OK);
    }

    #[test]
    fn missing_input_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("m.json");
        let code = run([
            "fairshift".as_ref(),
            "train".as_ref(),
            "--data".as_ref(),
            dir.path().join("missing.csv").as_os_str(),
            "--output".as_ref(),
            out.as_os_str(),
        ]);
        assert_eq!(code, EXIT_DATA);
    }
}
