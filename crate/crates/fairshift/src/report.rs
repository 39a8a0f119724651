//! Flat CSV extracts of the JSON reports, for external plotting.

use std::path::Path;

use fairshift_core::experiment::{ExperimentReport, MetricSummary, ModelMetrics};
use fairshift_core::importance::ImportanceReport;
use fairshift_core::roc::RocCurve;
use fairshift_core::shap::ShapReport;
use fairshift_core::CoefficientDelta;

use crate::io::{csv_writer, fmt_f64};
use crate::manifest::RunManifest;

const METRIC_HEADER: [&str; 10] = [
    "fold", "model", "auc", "acc", "tpr_diff_abs", "fpr_diff_abs", "eod_sq", "eod_reported", "overall_tpr",
    "fairness_improvement",
];

fn metric_row(fold: &str, model: &str, m: &ModelMetrics, f: Option<f64>) -> Vec<String> {
    let fm = &m.fairness;
    let mut row = vec![fold.to_string(), model.to_string()];
    row.extend(
        [m.auc, m.acc, fm.tpr_diff_abs, fm.fpr_diff_abs, fm.eod_sq, fm.eod_reported, fm.overall_tpr]
            .map(fmt_f64),
    );
    row.push(f.map(fmt_f64).unwrap_or_default());
    row
}

fn summary_row(label: &str, model: &str, s: &MetricSummary, pick: fn(&fairshift_core::experiment::MeanStd) -> f64, f: f64) -> Vec<String> {
    let mut row = vec![label.to_string(), model.to_string()];
    row.extend(
        [&s.auc, &s.acc, &s.tpr_diff_abs, &s.fpr_diff_abs, &s.eod_sq, &s.eod_reported, &s.overall_tpr]
            .map(|v| fmt_f64(pick(v))),
    );
    row.push(fmt_f64(f));
    row
}

/// One row per (fold, model), then `mean` and `std` rows.
pub fn write_metrics_csv(path: &Path, r: &ExperimentReport, manifest: &RunManifest) -> anyhow::Result<()> {
    let mut w = csv_writer(path, manifest)?;
    w.write_record(METRIC_HEADER)?;
    for f in &r.folds {
        let fold = f.fold.to_string();
        w.write_record(metric_row(&fold, "perf", &f.perf, None))?;
        w.write_record(metric_row(&fold, "fair", &f.fair, Some(f.fairness_improvement)))?;
    }
    let s = &r.summary;
    let fi = &s.fairness_improvement;
    w.write_record(summary_row("mean", "perf", &s.perf, |v| v.mean, fi.mean))?;
    w.write_record(summary_row("mean", "fair", &s.fair, |v| v.mean, fi.mean))?;
    w.write_record(summary_row("std", "perf", &s.perf, |v| v.std, fi.std))?;
    w.write_record(summary_row("std", "fair", &s.fair, |v| v.std, fi.std))?;
    w.flush()?;
    Ok(())
}

pub fn write_experiment_importance_csv(path: &Path, r: &ExperimentReport, manifest: &RunManifest) -> anyhow::Result<()> {
    let mut w = csv_writer(path, manifest)?;
    w.write_record(["feature", "delta_mean", "delta_std", "rank"])?;
    if let Some(imp) = &r.importance {
        for f in &imp.features {
            w.write_record([f.feature.clone(), fmt_f64(f.delta_mean), fmt_f64(f.delta_std), f.rank.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_experiment_coefficients_csv(path: &Path, r: &ExperimentReport, manifest: &RunManifest) -> anyhow::Result<()> {
    let mut w = csv_writer(path, manifest)?;
    w.write_record(["feature", "theta_lg", "theta_fair", "delta"])?;
    for e in &r.coefficient_delta.entries {
        w.write_record([e.feature.clone(), fmt_f64(e.theta_lg), fmt_f64(e.theta_fair), fmt_f64(e.delta)])?;
    }
    w.write_record([
        "(intercept)".to_string(),
        String::new(),
        String::new(),
        fmt_f64(r.coefficient_delta.intercept_delta),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_importance_csv(path: &Path, r: &ImportanceReport, manifest: &RunManifest) -> anyhow::Result<()> {
    let mut w = csv_writer(path, manifest)?;
    w.write_record(["feature", "delta_mean", "delta_std", "rank"])?;
    for f in &r.features {
        w.write_record([f.feature.clone(), fmt_f64(f.delta_mean), fmt_f64(f.delta_std), f.rank.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-feature mean |shap| ranking.
pub fn write_shap_csv(path: &Path, r: &ShapReport, manifest: &RunManifest) -> anyhow::Result<()> {
    let mut w = csv_writer(path, manifest)?;
    w.write_record(["feature", "mean_abs_shap", "rank"])?;
    for s in &r.ranking {
        w.write_record([s.feature.clone(), fmt_f64(s.mean_abs), s.rank.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_delta_csv(path: &Path, d: &CoefficientDelta, manifest: &RunManifest) -> anyhow::Result<()> {
    let mut w = csv_writer(path, manifest)?;
    w.write_record(["feature", "theta_lg", "theta_fair", "delta"])?;
    for e in d.by_magnitude() {
        w.write_record([e.feature.clone(), fmt_f64(e.theta_lg), fmt_f64(e.theta_fair), fmt_f64(e.delta)])?;
    }
    w.write_record([
        "(intercept)".to_string(),
        fmt_f64(d.intercept_lg),
        fmt_f64(d.intercept_fair),
        fmt_f64(d.intercept_delta),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_roc_csv(path: &Path, curve: &RocCurve, manifest: &RunManifest) -> anyhow::Result<()> {
    let mut w = csv_writer(path, manifest)?;
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in &curve.points {
        w.write_record([fmt_f64(p.threshold), fmt_f64(p.fpr), fmt_f64(p.tpr)])?;
    }
    w.flush()?;
    Ok(())
}
