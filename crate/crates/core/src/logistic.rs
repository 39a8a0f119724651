//! Plain logistic regression trained by full-batch gradient descent on the
//! summed binary cross-entropy.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::math::{dot, max_abs, sigmoid};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Coefficients, intercept and decision threshold of a logistic model.
///
/// Coefficients bind to `feature_names` by position. The threshold is unset
/// until one is chosen on a ROC curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub threshold: Option<f64>,
}

impl ModelWeights {
    pub fn new(feature_names: Vec<String>, coefficients: Vec<f64>, intercept: f64) -> Result<Self> {
        if feature_names.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                context: "model coefficients",
                expected: feature_names.len(),
                found: coefficients.len(),
            });
        }
        if let Some(col) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "model coefficients",
                row: 0,
                col,
            });
        }
        if !intercept.is_finite() {
            return Err(Error::NonFinite {
                context: "model intercept",
                row: 0,
                col: 0,
            });
        }
        Ok(Self {
            feature_names,
            coefficients,
            intercept,
            threshold: None,
        })
    }

    pub fn zeros(feature_names: Vec<String>) -> Self {
        let m = feature_names.len();
        Self {
            feature_names,
            coefficients: alloc::vec![0.0; m],
            intercept: 0.0,
            threshold: None,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        self.set_threshold(threshold)?;
        Ok(self)
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidThreshold(threshold));
        }
        self.threshold = Some(threshold);
        Ok(())
    }

    pub fn threshold(&self) -> Result<f64> {
        self.threshold.ok_or(Error::ThresholdUnset)
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    /// Checks that every stored number is finite and the threshold is a probability.
    pub fn validate(&self) -> Result<()> {
        let copy = Self::new(self.feature_names.clone(), self.coefficients.clone(), self.intercept)?;
        if let Some(t) = self.threshold {
            copy.with_threshold(t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Step size applied to the gradient of the *summed* loss, so the
    /// effective per-sample step grows with the row count. Values near
    /// `1 / n` are stable for standardized features.
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the infinity norm of the gradient falls below this.
    pub grad_tolerance: f64,
    /// Weight of `||theta||^2`; the intercept is not penalized.
    pub l2_penalty: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            max_epochs: 10_000,
            grad_tolerance: 1e-3,
            l2_penalty: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(self.grad_tolerance > 0.0) {
            return Err(Error::InvalidConfig("grad_tolerance must be positive".into()));
        }
        if !(self.l2_penalty >= 0.0) || !self.l2_penalty.is_finite() {
            return Err(Error::InvalidConfig("l2_penalty must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Gradient with respect to the coefficients and the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl Gradient {
    pub fn inf_norm(&self) -> f64 {
        max_abs(&self.coefficients).max(self.intercept.abs())
    }
}

fn check_input(w: &ModelWeights, x: &Matrix) -> Result<()> {
    if x.cols() != w.n_features() {
        return Err(Error::DimensionMismatch {
            context: "feature matrix columns",
            expected: w.n_features(),
            found: x.cols(),
        });
    }
    if let Some((row, col)) = x.first_non_finite() {
        return Err(Error::NonFinite {
            context: "feature matrix",
            row,
            col,
        });
    }
    Ok(())
}

fn check_labels(x: &Matrix, y: &[u8]) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            context: "labels",
            expected: x.rows(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Linear scores `theta . x_i + b`.
pub fn predict_margin(w: &ModelWeights, x: &Matrix) -> Result<Vec<f64>> {
    check_input(w, x)?;
    Ok(x.rows_iter().map(|r| dot(&w.coefficients, r) + w.intercept).collect())
}

/// `sigmoid(theta . x_i + b)` per row. Margins beyond roughly +-37 round to
/// exactly 0 or 1 in double precision.
pub fn predict_proba(w: &ModelWeights, x: &Matrix) -> Result<Vec<f64>> {
    Ok(predict_margin(w, x)?.into_iter().map(sigmoid).collect())
}

/// Hard labels: 1 iff the probability reaches the threshold (ties are positive).
pub fn classify(w: &ModelWeights, x: &Matrix) -> Result<Vec<u8>> {
    let t = w.threshold()?;
    Ok(classify_proba(&predict_proba(w, x)?, t))
}

pub fn classify_proba(probs: &[f64], threshold: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= threshold)).collect()
}

#[inline]
fn clamped_log_loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if y == 1 {
        -libm::log(p)
    } else {
        -libm::log(1.0 - p)
    }
}

fn l2_term(w: &ModelWeights, l2: f64) -> f64 {
    if l2 == 0.0 {
        0.0
    } else {
        l2 * dot(&w.coefficients, &w.coefficients)
    }
}

/// Summed binary cross-entropy plus `l2 * ||theta||^2`.
pub fn bce_loss(w: &ModelWeights, x: &Matrix, y: &[u8], l2: f64) -> Result<f64> {
    check_labels(x, y)?;
    let p = predict_proba(w, x)?;
    let data: f64 = p.iter().zip(y).map(|(&p, &y)| clamped_log_loss(p, y)).sum();
    Ok(data + l2_term(w, l2))
}

/// Loss and its analytic gradient in one pass:
/// `dJ/dtheta = X^T (p - y) + 2 l2 theta`, `dJ/db = sum(p - y)`.
pub fn bce_loss_and_gradient(w: &ModelWeights, x: &Matrix, y: &[u8], l2: f64) -> Result<(f64, Gradient)> {
    check_labels(x, y)?;
    check_input(w, x)?;
    let mut g = alloc::vec![0.0; w.n_features()];
    let mut gb = 0.0;
    let mut loss = 0.0;
    for (row, &yi) in x.rows_iter().zip(y) {
        let p = sigmoid(dot(&w.coefficients, row) + w.intercept);
        loss += clamped_log_loss(p, yi);
        let r = p - f64::from(yi);
        gb += r;
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
    }
    for (gj, tj) in g.iter_mut().zip(&w.coefficients) {
        *gj += 2.0 * l2 * tj;
    }
    Ok((
        loss + l2_term(w, l2),
        Gradient {
            coefficients: g,
            intercept: gb,
        },
    ))
}

pub fn bce_gradient(w: &ModelWeights, x: &Matrix, y: &[u8], l2: f64) -> Result<Gradient> {
    bce_loss_and_gradient(w, x, y, l2).map(|(_, g)| g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub converged: bool,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_grad_norm: f64,
}

/// Trains the performance-optimized model by full-batch gradient descent
/// from all-zero weights. The returned model has no threshold yet.
pub fn train_performance_model(d: &Dataset, cfg: &TrainConfig) -> Result<(ModelWeights, TrainSummary)> {
    cfg.validate()?;
    let pos = d.positives();
    if pos == 0 {
        return Err(Error::SingleClass(0));
    }
    if pos == d.n_rows() {
        return Err(Error::SingleClass(1));
    }
    let x = d.features();
    let y = d.labels();
    let mut w = ModelWeights::zeros(d.feature_names().to_vec());
    let (initial_loss, mut grad) = bce_loss_and_gradient(&w, x, y, cfg.l2_penalty)?;
    let mut loss = initial_loss;
    let mut epochs_run = 0;
    let mut converged = grad.inf_norm() < cfg.grad_tolerance;
    while !converged && epochs_run < cfg.max_epochs {
        for (t, g) in w.coefficients.iter_mut().zip(&grad.coefficients) {
            *t -= cfg.learning_rate * g;
        }
        w.intercept -= cfg.learning_rate * grad.intercept;
        epochs_run += 1;
        let (l, g) = bce_loss_and_gradient(&w, x, y, cfg.l2_penalty)?;
        if !l.is_finite() || !g.inf_norm().is_finite() {
            return Err(Error::Diverged { epoch: epochs_run });
        }
        loss = l;
        grad = g;
        converged = grad.inf_norm() < cfg.grad_tolerance;
    }
    if loss > initial_loss {
        return Err(Error::Diverged { epoch: epochs_run });
    }
    Ok((
        w,
        TrainSummary {
            epochs_run,
            converged,
            initial_loss,
            final_loss: loss,
            final_grad_norm: grad.inf_norm(),
        },
    ))
}
