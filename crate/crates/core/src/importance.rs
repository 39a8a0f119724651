//! Permutation importance of features for fairness improvement and for
//! predictive performance.
//!
//! Repetition `j` of feature `i` shuffles column `i` with its own generator
//! ([`crate::seed::permutation_rng`]), so every sample can be computed
//! independently and in any order; reports aggregate samples in
//! `(feature, repetition)` order.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::fairness::{check_cells, fairness_improvement};
use crate::logistic::{classify, predict_proba, ModelWeights};
use crate::math::{mean, sample_std};
use crate::roc::{accuracy, auc_from_scores};
use crate::seed::permutation_rng;

/// In-place Fisher-Yates shuffle drawing `j` uniformly from `0..=i` for
/// `i = n - 1, ..., 1`.
pub fn fisher_yates<T, R: Rng + ?Sized>(values: &mut [T], rng: &mut R) {
    for i in (1..values.len()).rev() {
        let j = rng.random_range(0..=i);
        values.swap(i, j);
    }
}

/// Copy of `x` with column `feature` shuffled; other columns are untouched.
pub fn permute_column<R: Rng + ?Sized>(x: &Matrix, feature: usize, rng: &mut R) -> Result<Matrix> {
    if feature >= x.cols() {
        return Err(Error::FeatureIndex {
            index: feature,
            count: x.cols(),
        });
    }
    let mut col = x.column(feature);
    fisher_yates(&mut col, rng);
    let mut out = x.clone();
    for (i, v) in col.into_iter().enumerate() {
        out.set(i, feature, v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceKind {
    /// Samples are `F` on the permuted data; `baseline` is the unpermuted `F`.
    Fairness,
    /// Samples are `metric(original) - metric(permuted)`.
    Predictive(PredictiveMetric),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictiveMetric {
    Auc,
    Acc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// Arithmetic mean of `samples`.
    pub delta_mean: f64,
    /// Sample standard deviation of `samples`.
    pub delta_std: f64,
    /// 1 = most important.
    pub rank: usize,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub kind: ImportanceKind,
    pub repetitions: usize,
    pub master_seed: u64,
    pub baseline: f64,
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    /// Assembles a report from per-feature sample vectors and assigns ranks:
    /// by `|delta_mean|` for fairness, by `delta_mean` for predictive
    /// importance, ties resolved by feature order.
    pub fn from_samples(
        kind: ImportanceKind,
        master_seed: u64,
        baseline: f64,
        names: &[String],
        samples: Vec<Vec<f64>>,
    ) -> Self {
        let repetitions = samples.first().map_or(0, Vec::len);
        let mut features: Vec<FeatureImportance> = names
            .iter()
            .zip(samples)
            .map(|(name, s)| FeatureImportance {
                feature: name.clone(),
                delta_mean: mean(&s),
                delta_std: sample_std(&s),
                rank: 0,
                samples: s,
            })
            .collect();
        let score = |f: &FeatureImportance| match kind {
            ImportanceKind::Fairness => f.delta_mean.abs(),
            ImportanceKind::Predictive(_) => f.delta_mean,
        };
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.sort_by(|&a, &b| score(&features[b]).total_cmp(&score(&features[a])));
        for (r, &i) in order.iter().enumerate() {
            features[i].rank = r + 1;
        }
        Self {
            kind,
            repetitions,
            master_seed,
            baseline,
            features,
        }
    }

    pub fn by_rank(&self) -> Vec<&FeatureImportance> {
        let mut v: Vec<&FeatureImportance> = self.features.iter().collect();
        v.sort_by_key(|f| f.rank);
        v
    }

    pub fn get(&self, name: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.feature == name)
    }
}

fn check_pair(x: &Matrix, lg: &ModelWeights, fair: &ModelWeights) -> Result<()> {
    if lg.feature_names != fair.feature_names {
        return Err(Error::FeatureMismatch);
    }
    if lg.n_features() != x.cols() {
        return Err(Error::DimensionMismatch {
            context: "importance feature matrix",
            expected: lg.n_features(),
            found: x.cols(),
        });
    }
    lg.threshold()?;
    fair.threshold()?;
    Ok(())
}

/// One repetition: `F` with column `feature` shuffled by stream
/// `(master_seed, feature, repetition)`. The group vector `z` is never
/// permuted, even when a feature column encodes the same attribute.
pub fn fairness_sample(
    x: &Matrix,
    y: &[u8],
    z: &[u8],
    lg: &ModelWeights,
    fair: &ModelWeights,
    feature: usize,
    repetition: usize,
    master_seed: u64,
) -> Result<f64> {
    let mut rng = permutation_rng(master_seed, feature, repetition);
    let permuted = permute_column(x, feature, &mut rng)?;
    fairness_improvement(&permuted, y, z, lg, fair)
}

/// Permutation fairness importance: for each feature, the mean of `F` over
/// `repetitions` shuffles of that feature's column.
///
/// The (Y, Z) cells only depend on `y` and `z`, which are never shuffled, so
/// a permuted input can never empty a cell; cells are checked once up front.
pub fn fairness_importance(
    x: &Matrix,
    y: &[u8],
    z: &[u8],
    lg: &ModelWeights,
    fair: &ModelWeights,
    repetitions: usize,
    master_seed: u64,
) -> Result<ImportanceReport> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    check_pair(x, lg, fair)?;
    check_cells(y, z)?;
    let baseline = fairness_improvement(x, y, z, lg, fair)?;
    let samples = (0..x.cols())
        .map(|i| {
            (0..repetitions)
                .map(|j| fairness_sample(x, y, z, lg, fair, i, j, master_seed))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImportanceReport::from_samples(
        ImportanceKind::Fairness,
        master_seed,
        baseline,
        &lg.feature_names,
        samples,
    ))
}

pub fn predictive_score(model: &ModelWeights, x: &Matrix, y: &[u8], metric: PredictiveMetric) -> Result<f64> {
    match metric {
        PredictiveMetric::Auc => auc_from_scores(&predict_proba(model, x)?, y),
        PredictiveMetric::Acc => Ok(accuracy(&classify(model, x)?, y)),
    }
}

/// `metric(original) - metric(column shuffled)` for one repetition.
pub fn predictive_sample(
    x: &Matrix,
    y: &[u8],
    model: &ModelWeights,
    metric: PredictiveMetric,
    baseline: f64,
    feature: usize,
    repetition: usize,
    master_seed: u64,
) -> Result<f64> {
    let mut rng = permutation_rng(master_seed, feature, repetition);
    let permuted = permute_column(x, feature, &mut rng)?;
    Ok(baseline - predictive_score(model, &permuted, y, metric)?)
}

/// Classic permutation importance of a single model for AUC or accuracy.
pub fn predictive_importance(
    x: &Matrix,
    y: &[u8],
    model: &ModelWeights,
    metric: PredictiveMetric,
    repetitions: usize,
    master_seed: u64,
) -> Result<ImportanceReport> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            context: "importance labels",
            expected: x.rows(),
            found: y.len(),
        });
    }
    let baseline = predictive_score(model, x, y, metric)?;
    let samples = (0..x.cols())
        .map(|i| {
            (0..repetitions)
                .map(|j| predictive_sample(x, y, model, metric, baseline, i, j, master_seed))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImportanceReport::from_samples(
        ImportanceKind::Predictive(metric),
        master_seed,
        baseline,
        &model.feature_names,
        samples,
    ))
}
