//! Stratified k-fold evaluation of the performance/fair model pair.
//!
//! Every fitted artifact of a fold (scaler, both thresholds, the TPR anchor,
//! both weight vectors) is computed from that fold's training rows only;
//! held-out rows are used for metrics and permutation importance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::fairness::{check_cells, model_fairness, FairnessMetrics};
use crate::importance::{fairness_importance, ImportanceReport};
use crate::logistic::{classify, predict_proba, train_performance_model, ModelWeights, TrainConfig, TrainSummary};
use crate::math::{mean, sample_std};
use crate::preprocess::{standardize, stratified_kfold, FoldAssignment, ScalerParams};
use crate::roc::{accuracy, auc_from_scores, er_threshold, roc_curve};
use crate::seed;
use crate::transfer::{tpr_anchor, train_fair_model, CoefficientDelta, FairTransferConfig, TransferCheck, TransferSummary};

pub const SCHEMA_VERSION: u32 = 1;

const TAG_FOLDS: u64 = 0x464f_4c44_53;
const TAG_IMPORTANCE: u64 = 0x494d_504f_5254;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub folds: usize,
    /// Permutation repetitions per feature; 0 disables importance.
    pub repetitions: usize,
    /// Standardize non-binary features with training-fold statistics.
    pub standardize: bool,
    pub train: TrainConfig,
    pub transfer: FairTransferConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            repetitions: 100,
            standardize: true,
            train: TrainConfig::default(),
            transfer: FairTransferConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidFoldCount(self.folds));
        }
        self.train.validate()?;
        self.transfer.validate()
    }
}

/// Seed of the fold assignment for a given master seed.
pub fn fold_seed(master_seed: u64) -> u64 {
    seed::derive(master_seed, TAG_FOLDS, 0)
}

/// Importance master seed used on held-out fold `fold`.
pub fn importance_seed(master_seed: u64, fold: usize) -> u64 {
    seed::derive(master_seed, TAG_IMPORTANCE, fold as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub auc: f64,
    pub acc: f64,
    pub fairness: FairnessMetrics,
}

pub fn evaluate(model: &ModelWeights, d: &Dataset) -> Result<ModelMetrics> {
    let p = predict_proba(model, d.features())?;
    Ok(ModelMetrics {
        auc: auc_from_scores(&p, d.labels())?,
        acc: accuracy(&classify(model, d.features())?, d.labels()),
        fairness: model_fairness(model, d.features(), d.labels(), d.group())?,
    })
}

/// Everything a fold fits, all of it from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldArtifacts {
    pub scaler: ScalerParams,
    pub perf: ModelWeights,
    pub fair: ModelWeights,
    pub tpr_anchor: f64,
    pub perf_training: TrainSummary,
    pub transfer: TransferSummary,
    pub transfer_check: TransferCheck,
    /// True when the fair model failed the training-data check; it is still
    /// evaluated so the failure is visible in the report.
    pub non_improving: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub perf: ModelMetrics,
    pub fair: ModelMetrics,
    /// `eod_sq(fair) - eod_sq(perf)` on the held-out rows.
    pub fairness_improvement: f64,
    pub coefficient_delta: CoefficientDelta,
    pub artifacts: FoldArtifacts,
    pub importance: Option<ImportanceReport>,
}

/// Fits the scaler, both models and their thresholds on `train`.
pub fn fit_fold(train: &Dataset, cfg: &ExperimentConfig) -> Result<FoldArtifacts> {
    let (train_s, scaler) = if cfg.standardize {
        standardize(train, None, &train.binary_columns())?
    } else {
        (train.clone(), ScalerParams::identity(train.n_features()))
    };
    let (mut perf, perf_training) = train_performance_model(&train_s, &cfg.train)?;
    let p = predict_proba(&perf, train_s.features())?;
    perf.set_threshold(er_threshold(&roc_curve(&p, train_s.labels())?))?;
    let anchor = tpr_anchor(&perf, &train_s)?;
    let (outcome, non_improving) = match train_fair_model(&train_s, &perf, &cfg.transfer) {
        Ok(t) => (t, false),
        Err(Error::NonImproving(t)) => {
            log::warn!(
                "fair model failed the training check (eod {} vs {}, tpr {} vs anchor {})",
                t.check.eod_fair,
                t.check.eod_perf,
                t.check.tpr_fair,
                t.check.tpr_anchor
            );
            (*t, true)
        }
        Err(e) => return Err(e),
    };
    Ok(FoldArtifacts {
        scaler,
        perf,
        fair: outcome.weights,
        tpr_anchor: anchor,
        perf_training,
        transfer: outcome.summary,
        transfer_check: outcome.check,
        non_improving,
    })
}

/// Signature shared by the sequential and parallel importance routines.
pub type ImportanceFn<'a> =
    dyn Fn(&Matrix, &[u8], &[u8], &ModelWeights, &ModelWeights, usize, u64) -> Result<ImportanceReport> + Sync + 'a;

/// Runs one fold given explicit row indices.
pub fn run_fold(
    d: &Dataset,
    fold: usize,
    train_idx: &[usize],
    test_idx: &[usize],
    cfg: &ExperimentConfig,
    master_seed: u64,
    importance: &ImportanceFn<'_>,
) -> Result<FoldReport> {
    let train = d.select_rows(train_idx)?;
    let test = d.select_rows(test_idx)?;
    check_cells(test.labels(), test.group())?;
    let artifacts = fit_fold(&train, cfg)?;
    let (test_s, _) = standardize(&test, Some(&artifacts.scaler), &[])?;
    let perf = evaluate(&artifacts.perf, &test_s)?;
    let fair = evaluate(&artifacts.fair, &test_s)?;
    let importance = if cfg.repetitions > 0 {
        Some(importance(
            test_s.features(),
            test_s.labels(),
            test_s.group(),
            &artifacts.perf,
            &artifacts.fair,
            cfg.repetitions,
            importance_seed(master_seed, fold),
        )?)
    } else {
        None
    };
    Ok(FoldReport {
        fold,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        fairness_improvement: fair.fairness.eod_sq - perf.fairness.eod_sq,
        perf,
        fair,
        coefficient_delta: crate::transfer::coefficient_delta(&artifacts.perf, &artifacts.fair)?,
        artifacts,
        importance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation across folds (0 for a single fold).
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values),
            std: sample_std(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub auc: MeanStd,
    pub acc: MeanStd,
    pub tpr_diff_abs: MeanStd,
    pub fpr_diff_abs: MeanStd,
    pub eod_sq: MeanStd,
    pub eod_reported: MeanStd,
    pub overall_tpr: MeanStd,
}

impl MetricSummary {
    fn of<'a>(metrics: impl Iterator<Item = &'a ModelMetrics> + Clone) -> Self {
        let col = |f: fn(&ModelMetrics) -> f64| MeanStd::of(&metrics.clone().map(f).collect::<Vec<_>>());
        Self {
            auc: col(|m| m.auc),
            acc: col(|m| m.acc),
            tpr_diff_abs: col(|m| m.fairness.tpr_diff_abs),
            fpr_diff_abs: col(|m| m.fairness.fpr_diff_abs),
            eod_sq: col(|m| m.fairness.eod_sq),
            eod_reported: col(|m| m.fairness.eod_reported),
            overall_tpr: col(|m| m.fairness.overall_tpr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedFeature {
    pub feature: String,
    /// Mean over folds of the per-fold `delta_mean`.
    pub delta_mean: f64,
    /// Spread of the per-fold means.
    pub delta_std: f64,
    pub rank: usize,
    pub fold_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedImportance {
    pub repetitions: usize,
    pub baseline: MeanStd,
    pub features: Vec<AggregatedFeature>,
}

impl AggregatedImportance {
    pub fn from_folds(reports: &[&ImportanceReport]) -> Option<Self> {
        let first = reports.first()?;
        let baselines: Vec<f64> = reports.iter().map(|r| r.baseline).collect();
        let mut features: Vec<AggregatedFeature> = first
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let fold_means: Vec<f64> = reports.iter().map(|r| r.features[i].delta_mean).collect();
                let s = MeanStd::of(&fold_means);
                AggregatedFeature {
                    feature: f.feature.clone(),
                    delta_mean: s.mean,
                    delta_std: s.std,
                    rank: 0,
                    fold_means,
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.sort_by(|&a, &b| features[b].delta_mean.abs().total_cmp(&features[a].delta_mean.abs()));
        for (r, &i) in order.iter().enumerate() {
            features[i].rank = r + 1;
        }
        Some(Self {
            repetitions: first.repetitions,
            baseline: MeanStd::of(&baselines),
            features,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedDeltaEntry {
    pub feature: String,
    pub theta_lg: f64,
    pub theta_fair: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedDelta {
    pub entries: Vec<AveragedDeltaEntry>,
    pub intercept_delta: f64,
}

impl AveragedDelta {
    pub fn from_folds(deltas: &[&CoefficientDelta]) -> Self {
        let Some(first) = deltas.first() else {
            return Self {
                entries: Vec::new(),
                intercept_delta: 0.0,
            };
        };
        let avg = |f: &dyn Fn(&CoefficientDelta) -> f64| mean(&deltas.iter().map(|d| f(d)).collect::<Vec<_>>());
        let entries = first
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| AveragedDeltaEntry {
                feature: e.feature.clone(),
                theta_lg: avg(&|d| d.entries[i].theta_lg),
                theta_fair: avg(&|d| d.entries[i].theta_fair),
                delta: avg(&|d| d.entries[i].delta),
            })
            .collect();
        Self {
            entries,
            intercept_delta: avg(&|d| d.intercept_delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub fold: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub perf: MetricSummary,
    pub fair: MetricSummary,
    pub fairness_improvement: MeanStd,
    pub non_improving_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub master_seed: u64,
    pub fold_seed: u64,
    pub n_rows: usize,
    pub feature_names: Vec<String>,
    pub config: ExperimentConfig,
    pub folds: Vec<FoldReport>,
    pub skipped: Vec<SkippedFold>,
    pub summary: ExperimentSummary,
    pub importance: Option<AggregatedImportance>,
    pub coefficient_delta: AveragedDelta,
    pub warnings: Vec<String>,
}

/// Decides which folds can run: a held-out fold missing a (Y, Z) cell is
/// skipped when it is the only one, and is an error otherwise.
pub fn plan_folds(d: &Dataset, assignment: &FoldAssignment) -> Result<(Vec<usize>, Vec<SkippedFold>)> {
    let mut run = Vec::new();
    let mut skipped = Vec::new();
    for f in 0..assignment.k {
        let (_, test) = assignment.split(f);
        let y: Vec<u8> = test.iter().map(|&i| d.labels()[i]).collect();
        let z: Vec<u8> = test.iter().map(|&i| d.group()[i]).collect();
        match check_cells(&y, &z) {
            Ok(()) => run.push(f),
            Err(e @ Error::DegenerateCell(_)) => skipped.push(SkippedFold {
                fold: f,
                reason: format!("{e}"),
            }),
            Err(e) => return Err(e),
        }
    }
    if skipped.len() > 1 {
        return Err(Error::TooManySkippedFolds {
            failed: skipped.len(),
            total: assignment.k,
        });
    }
    Ok((run, skipped))
}

/// Combines per-fold reports, which must be ordered by fold index.
pub fn aggregate(
    d: &Dataset,
    cfg: &ExperimentConfig,
    master_seed: u64,
    folds: Vec<FoldReport>,
    skipped: Vec<SkippedFold>,
) -> ExperimentReport {
    let mut warnings: Vec<String> = skipped
        .iter()
        .map(|s| format!("fold {} skipped: {}", s.fold, s.reason))
        .collect();
    for f in folds.iter().filter(|f| f.artifacts.non_improving) {
        warnings.push(format!("fold {}: fair model failed the training-data check", f.fold));
    }
    let improvements: Vec<f64> = folds.iter().map(|f| f.fairness_improvement).collect();
    let importances: Vec<&ImportanceReport> = folds.iter().filter_map(|f| f.importance.as_ref()).collect();
    let deltas: Vec<&CoefficientDelta> = folds.iter().map(|f| &f.coefficient_delta).collect();
    let summary = ExperimentSummary {
        perf: MetricSummary::of(folds.iter().map(|f| &f.perf)),
        fair: MetricSummary::of(folds.iter().map(|f| &f.fair)),
        fairness_improvement: MeanStd::of(&improvements),
        non_improving_folds: folds.iter().filter(|f| f.artifacts.non_improving).count(),
    };
    ExperimentReport {
        schema_version: SCHEMA_VERSION,
        master_seed,
        fold_seed: fold_seed(master_seed),
        n_rows: d.n_rows(),
        feature_names: d.feature_names().to_vec(),
        config: cfg.clone(),
        importance: AggregatedImportance::from_folds(&importances),
        coefficient_delta: AveragedDelta::from_folds(&deltas),
        folds,
        skipped,
        summary,
        warnings,
    }
}

/// Sequential experiment over a precomputed fold assignment.
pub fn run_experiment_with_folds(
    d: &Dataset,
    assignment: &FoldAssignment,
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (run, skipped) = plan_folds(d, assignment)?;
    let folds = run
        .into_iter()
        .map(|f| {
            let (train, test) = assignment.split(f);
            run_fold(d, f, &train, &test, cfg, master_seed, &fairness_importance)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(d, cfg, master_seed, folds, skipped))
}

pub fn run_experiment(d: &Dataset, cfg: &ExperimentConfig, master_seed: u64) -> Result<ExperimentReport> {
    cfg.validate()?;
    let assignment = stratified_kfold(d, cfg.folds, fold_seed(master_seed))?;
    run_experiment_with_folds(d, &assignment, cfg, master_seed)
}
