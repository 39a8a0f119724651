//! Rayon-backed versions of the embarrassingly parallel core routines.
//!
//! Each work item derives its own generator, and results are collected in
//! index order, so output is bitwise identical for any thread count.

use fairshift_core::dataset::Matrix;
use fairshift_core::experiment::{
    aggregate, fold_seed, plan_folds, run_fold, ExperimentConfig, ExperimentReport,
};
use fairshift_core::fairness::{check_cells, fairness_improvement};
use fairshift_core::importance::{
    fairness_sample, predictive_sample, predictive_score, ImportanceKind, ImportanceReport, PredictiveMetric,
};
use fairshift_core::preprocess::{stratified_kfold, FoldAssignment};
use fairshift_core::{Dataset, Error, ModelWeights, Result};
use rayon::prelude::*;

/// Environment variable capping worker threads; unset or 0 means one per core.
pub const THREADS_ENV: &str = "FAIRSHIFT_THREADS";

pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Runs `f` inside a pool sized by [`THREADS_ENV`].
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(thread_count()).build()?;
    Ok(pool.install(f))
}

fn grid(features: usize, repetitions: usize) -> Vec<(usize, usize)> {
    (0..features).flat_map(|i| (0..repetitions).map(move |j| (i, j))).collect()
}

fn regroup(flat: Vec<f64>, repetitions: usize) -> Vec<Vec<f64>> {
    flat.chunks(repetitions).map(<[f64]>::to_vec).collect()
}

/// Parallel counterpart of [`fairshift_core::importance::fairness_importance`].
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
    if lg.feature_names != fair.feature_names {
        return Err(Error::FeatureMismatch);
    }
    check_cells(y, z)?;
    let baseline = fairness_improvement(x, y, z, lg, fair)?;
    let flat = grid(x.cols(), repetitions)
        .into_par_iter()
        .map(|(i, j)| fairness_sample(x, y, z, lg, fair, i, j, master_seed))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ImportanceReport::from_samples(
        ImportanceKind::Fairness,
        master_seed,
        baseline,
        &lg.feature_names,
        regroup(flat, repetitions),
    ))
}

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
    let baseline = predictive_score(model, x, y, metric)?;
    let flat = grid(x.cols(), repetitions)
        .into_par_iter()
        .map(|(i, j)| predictive_sample(x, y, model, metric, baseline, i, j, master_seed))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ImportanceReport::from_samples(
        ImportanceKind::Predictive(metric),
        master_seed,
        baseline,
        &model.feature_names,
        regroup(flat, repetitions),
    ))
}

pub fn run_experiment_with_folds(
    d: &Dataset,
    assignment: &FoldAssignment,
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (run, skipped) = plan_folds(d, assignment)?;
    let folds = run
        .into_par_iter()
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
