//! Transfer of a performance-optimized model into an equalized-odds model.
//!
//! The fair model starts from a copy of the performance model's weights and
//! threshold `t`. Hard decisions `p_i >= t` are replaced during optimization
//! by the soft score `s_i = sigmoid((p_i - t) / tau)`; group TPR/FPR become
//! means of `s_i` over the (Y, Z) cells, and the overall-TPR band
//! `|TPR - TPR_0| <= epsilon` is enforced with the squared hinge
//! `lambda * max(0, |soft TPR - TPR_0| - epsilon)^2`. Evaluation always uses
//! hard decisions.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::fairness::{check_cells, model_fairness, EodVariant};
use crate::logistic::{predict_proba, Gradient, ModelWeights};
use crate::math::sigmoid;
use crate::roc::{er_threshold, roc_curve};

/// Slack added to `epsilon` when checking the hard overall TPR of a trained
/// fair model, absorbing the gap between soft and hard rates.
pub const TPR_SLACK: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairTransferConfig {
    /// Half-width of the allowed band around the anchor TPR.
    pub epsilon: f64,
    /// Temperature of the soft decision, in probability units.
    pub surrogate_temperature: f64,
    /// Weight of the band-violation penalty.
    pub penalty_weight: f64,
    /// Step size on the surrogate loss (a mean-based quantity, so this does
    /// not scale with the row count).
    pub learning_rate: f64,
    /// Fine-tuning budget. Zero returns the transferred weights untouched.
    pub max_epochs: usize,
    pub grad_tolerance: f64,
    pub seed: u64,
    pub eod_variant: EodVariant,
}

impl Default for FairTransferConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            surrogate_temperature: 0.05,
            penalty_weight: 10.0,
            learning_rate: 0.5,
            max_epochs: 4,
            grad_tolerance: 1e-6,
            seed: 0,
            eod_variant: EodVariant::SquaredSum,
        }
    }
}

impl FairTransferConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.epsilon) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if !positive(self.surrogate_temperature) {
            return Err(Error::InvalidConfig("surrogate_temperature must be positive".into()));
        }
        if !positive(self.penalty_weight) {
            return Err(Error::InvalidConfig("penalty_weight must be positive".into()));
        }
        if !positive(self.learning_rate) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !positive(self.grad_tolerance) {
            return Err(Error::InvalidConfig("grad_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Copies the trained performance model as the fair model's starting point.
pub fn init_fair_from(perf: &ModelWeights) -> Result<ModelWeights> {
    perf.validate()?;
    perf.threshold()?;
    Ok(perf.clone())
}

/// Soft (Y, Z)-cell rates, indexed `[group][label]`.
pub type SoftRates = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct SoftFairLoss {
    pub loss: f64,
    pub eod_term: f64,
    pub penalty_term: f64,
    pub soft_rates: SoftRates,
    pub soft_tpr: f64,
    pub gradient: Gradient,
}

/// Surrogate fair loss and its exact gradient at the model's own threshold.
pub fn soft_fair_loss(
    w: &ModelWeights,
    x: &Matrix,
    y: &[u8],
    z: &[u8],
    tpr_anchor: f64,
    cfg: &FairTransferConfig,
) -> Result<SoftFairLoss> {
    let t = w.threshold()?;
    if y.len() != x.rows() || z.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            context: "fair loss inputs",
            expected: x.rows(),
            found: if y.len() != x.rows() { y.len() } else { z.len() },
        });
    }
    check_cells(y, z)?;
    let tau = cfg.surrogate_temperature;
    let p = predict_proba(w, x)?;

    let mut counts = [[0usize; 2]; 2];
    let mut sums = [[0.0f64; 2]; 2];
    let mut soft = Vec::with_capacity(p.len());
    for ((&pi, &yi), &zi) in p.iter().zip(y).zip(z) {
        let s = sigmoid((pi - t) / tau);
        soft.push(s);
        counts[usize::from(zi)][usize::from(yi)] += 1;
        sums[usize::from(zi)][usize::from(yi)] += s;
    }
    let mut rates = [[0.0; 2]; 2];
    for g in 0..2 {
        for l in 0..2 {
            rates[g][l] = sums[g][l] / counts[g][l] as f64;
        }
    }
    let d_tpr = rates[1][1] - rates[0][1];
    let d_fpr = rates[1][0] - rates[0][0];
    let (eod_term, g_tpr, g_fpr) = match cfg.eod_variant {
        EodVariant::SquaredSum => (d_tpr * d_tpr + d_fpr * d_fpr, 2.0 * d_tpr, 2.0 * d_fpr),
        EodVariant::MeanAbs => (
            (d_tpr.abs() + d_fpr.abs()) / 2.0,
            sign(d_tpr) / 2.0,
            sign(d_fpr) / 2.0,
        ),
    };

    let positives = counts[0][1] + counts[1][1];
    let soft_tpr = (sums[0][1] + sums[1][1]) / positives as f64;
    let gap = soft_tpr - tpr_anchor;
    let hinge = (gap.abs() - cfg.epsilon).max(0.0);
    let penalty_term = cfg.penalty_weight * hinge * hinge;
    let g_band = 2.0 * cfg.penalty_weight * hinge * sign(gap);

    // dL/ds_i for each cell, indexed [group][label]
    let mut ds = [[0.0; 2]; 2];
    ds[1][1] = g_tpr / counts[1][1] as f64 + g_band / positives as f64;
    ds[0][1] = -g_tpr / counts[0][1] as f64 + g_band / positives as f64;
    ds[1][0] = g_fpr / counts[1][0] as f64;
    ds[0][0] = -g_fpr / counts[0][0] as f64;

    let mut gc = alloc::vec![0.0; w.n_features()];
    let mut gb = 0.0;
    for (i, row) in x.rows_iter().enumerate() {
        let (s, pi) = (soft[i], p[i]);
        let dm = ds[usize::from(z[i])][usize::from(y[i])] * s * (1.0 - s) * pi * (1.0 - pi) / tau;
        gb += dm;
        for (g, xj) in gc.iter_mut().zip(row) {
            *g += dm * xj;
        }
    }

    Ok(SoftFairLoss {
        loss: eod_term + penalty_term,
        eod_term,
        penalty_term,
        soft_rates: rates,
        soft_tpr,
        gradient: Gradient {
            coefficients: gc,
            intercept: gb,
        },
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub feature: String,
    pub theta_lg: f64,
    pub theta_fair: f64,
    pub delta: f64,
}

/// Per-feature coefficient changes from the performance model to the fair
/// model, stored in feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDelta {
    pub entries: Vec<DeltaEntry>,
    pub intercept_lg: f64,
    pub intercept_fair: f64,
    pub intercept_delta: f64,
}

impl CoefficientDelta {
    /// Entries ordered by `|delta|`, largest first (stable on ties).
    pub fn by_magnitude(&self) -> Vec<&DeltaEntry> {
        let mut v: Vec<&DeltaEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.delta.abs().total_cmp(&a.delta.abs()));
        v
    }
}

pub fn coefficient_delta(perf: &ModelWeights, fair: &ModelWeights) -> Result<CoefficientDelta> {
    if perf.feature_names != fair.feature_names {
        return Err(Error::FeatureMismatch);
    }
    Ok(CoefficientDelta {
        entries: perf
            .feature_names
            .iter()
            .zip(perf.coefficients.iter().zip(&fair.coefficients))
            .map(|(name, (&lg, &fr))| DeltaEntry {
                feature: name.clone(),
                theta_lg: lg,
                theta_fair: fr,
                delta: fr - lg,
            })
            .collect(),
        intercept_lg: perf.intercept,
        intercept_fair: fair.intercept,
        intercept_delta: fair.intercept - perf.intercept,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSummary {
    pub epsilon: f64,
    pub tau: f64,
    pub lambda: f64,
    pub tpr_anchor: f64,
    pub epochs_run: usize,
    pub converged: bool,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Post-training comparison of the two models on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCheck {
    pub variant: EodVariant,
    pub eod_perf: f64,
    pub eod_fair: f64,
    pub tpr_anchor: f64,
    pub tpr_fair: f64,
    pub eod_not_worse: bool,
    pub tpr_in_band: bool,
}

impl TransferCheck {
    pub fn passed(&self) -> bool {
        self.eod_not_worse && self.tpr_in_band
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairTransfer {
    pub weights: ModelWeights,
    pub delta: CoefficientDelta,
    pub summary: TransferSummary,
    pub check: TransferCheck,
}

/// Hard overall TPR of a thresholded model, the anchor of the TPR band.
pub fn tpr_anchor(perf: &ModelWeights, d: &Dataset) -> Result<f64> {
    Ok(model_fairness(perf, d.features(), d.labels(), d.group())?.overall_tpr)
}

/// Fine-tunes a copy of `perf` on the surrogate fair loss, then picks a new
/// closest-to-(0,1) threshold for it on `d`.
///
/// A model whose hard EOD on `d` is worse than `perf`'s, or whose hard
/// overall TPR leaves `anchor +- (epsilon + TPR_SLACK)`, is returned inside
/// [`Error::NonImproving`].
pub fn train_fair_model(d: &Dataset, perf: &ModelWeights, cfg: &FairTransferConfig) -> Result<FairTransfer> {
    cfg.validate()?;
    let mut w = init_fair_from(perf)?;
    if w.feature_names != d.feature_names() {
        return Err(Error::FeatureMismatch);
    }
    let (x, y, z) = (d.features(), d.labels(), d.group());
    let anchor = tpr_anchor(perf, d)?;

    let first = soft_fair_loss(&w, x, y, z, anchor, cfg)?;
    let initial_loss = first.loss;
    let mut current = first;
    let mut epochs_run = 0;
    let mut converged = current.gradient.inf_norm() < cfg.grad_tolerance;
    while !converged && epochs_run < cfg.max_epochs {
        for (t, g) in w.coefficients.iter_mut().zip(&current.gradient.coefficients) {
            *t -= cfg.learning_rate * g;
        }
        w.intercept -= cfg.learning_rate * current.gradient.intercept;
        epochs_run += 1;
        if w.coefficients.iter().any(|c| !c.is_finite()) || !w.intercept.is_finite() {
            return Err(Error::Diverged { epoch: epochs_run });
        }
        current = soft_fair_loss(&w, x, y, z, anchor, cfg)?;
        if !current.loss.is_finite() {
            return Err(Error::Diverged { epoch: epochs_run });
        }
        converged = current.gradient.inf_norm() < cfg.grad_tolerance;
    }

    if epochs_run > 0 {
        let p = predict_proba(&w, x)?;
        w.set_threshold(er_threshold(&roc_curve(&p, y)?))?;
    }

    let perf_metrics = model_fairness(perf, x, y, z)?;
    let fair_metrics = model_fairness(&w, x, y, z)?;
    let eod_perf = perf_metrics.eod(cfg.eod_variant);
    let eod_fair = fair_metrics.eod(cfg.eod_variant);
    let band = cfg.epsilon + TPR_SLACK;
    let check = TransferCheck {
        variant: cfg.eod_variant,
        eod_perf,
        eod_fair,
        tpr_anchor: anchor,
        tpr_fair: fair_metrics.overall_tpr,
        eod_not_worse: eod_fair <= eod_perf,
        tpr_in_band: (fair_metrics.overall_tpr - anchor).abs() <= band,
    };
    let outcome = FairTransfer {
        delta: coefficient_delta(perf, &w)?,
        weights: w,
        summary: TransferSummary {
            epsilon: cfg.epsilon,
            tau: cfg.surrogate_temperature,
            lambda: cfg.penalty_weight,
            tpr_anchor: anchor,
            epochs_run,
            converged,
            initial_loss,
            final_loss: current.loss,
        },
        check,
    };
    if outcome.check.passed() {
        Ok(outcome)
    } else {
        Err(Error::NonImproving(alloc::boxed::Box::new(outcome)))
    }
}
