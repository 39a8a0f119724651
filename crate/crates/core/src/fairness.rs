//! Group-conditional error rates and the Equalized Odds Disparity.

use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Cell, Error, Result};
use crate::logistic::{classify, ModelWeights};

/// Which EOD aggregate to use where one must be chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EodVariant {
    /// `(TPR_1 - TPR_0)^2 + (FPR_1 - FPR_0)^2`.
    #[default]
    SquaredSum,
    /// `(|TPR_1 - TPR_0| + |FPR_1 - FPR_0|) / 2`, the form that matches
    /// published tables which print a mean of the two absolute gaps.
    MeanAbs,
}

/// Confusion tallies within one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn tpr(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn fpr(&self) -> f64 {
        self.fp as f64 / (self.fp + self.tn) as f64
    }
}

/// Rates for group 1 (Z = 1, White) and group 0 (Z = 0, Non-White).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub tpr_g1: f64,
    pub fpr_g1: f64,
    pub tpr_g0: f64,
    pub fpr_g0: f64,
    pub counts_g1: Confusion,
    pub counts_g0: Confusion,
}

fn tally(preds: &[u8], y: &[u8], z: &[u8]) -> Result<[Confusion; 2]> {
    if y.len() != preds.len() || z.len() != preds.len() {
        return Err(Error::DimensionMismatch {
            context: "group rate inputs",
            expected: preds.len(),
            found: if y.len() != preds.len() { y.len() } else { z.len() },
        });
    }
    let mut c = [Confusion::default(); 2];
    for ((&p, &yi), &zi) in preds.iter().zip(y).zip(z) {
        let g = &mut c[usize::from(zi == 1)];
        match (yi == 1, p == 1) {
            (true, true) => g.tp += 1,
            (true, false) => g.fn_ += 1,
            (false, true) => g.fp += 1,
            (false, false) => g.tn += 1,
        }
    }
    Ok(c)
}

/// Checks that every (Y, Z) cell has at least one member.
pub fn check_cells(y: &[u8], z: &[u8]) -> Result<()> {
    for group in [1u8, 0] {
        for label in [1u8, 0] {
            if !y.iter().zip(z).any(|(&yi, &zi)| yi == label && zi == group) {
                return Err(Error::DegenerateCell(Cell { label, group }));
            }
        }
    }
    Ok(())
}

/// Exact empirical TPR and FPR within each group.
pub fn group_rates(preds: &[u8], y: &[u8], z: &[u8]) -> Result<GroupRates> {
    let [g0, g1] = tally(preds, y, z)?;
    check_cells(y, z)?;
    Ok(GroupRates {
        tpr_g1: g1.tpr(),
        fpr_g1: g1.fpr(),
        tpr_g0: g0.tpr(),
        fpr_g0: g0.fpr(),
        counts_g1: g1,
        counts_g0: g0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessMetrics {
    pub tpr_diff_sq: f64,
    pub fpr_diff_sq: f64,
    /// `tpr_diff_sq + fpr_diff_sq`.
    pub eod_sq: f64,
    pub tpr_diff_abs: f64,
    pub fpr_diff_abs: f64,
    /// `(tpr_diff_abs + fpr_diff_abs) / 2`.
    pub eod_reported: f64,
    /// Pooled `P(pred = 1 | Y = 1)` over both groups.
    pub overall_tpr: f64,
    pub rates: GroupRates,
}

impl FairnessMetrics {
    pub fn from_rates(rates: GroupRates) -> Self {
        let tpr_diff_abs = (rates.tpr_g1 - rates.tpr_g0).abs();
        let fpr_diff_abs = (rates.fpr_g1 - rates.fpr_g0).abs();
        let tpr_diff_sq = tpr_diff_abs * tpr_diff_abs;
        let fpr_diff_sq = fpr_diff_abs * fpr_diff_abs;
        let (a, b) = (rates.counts_g1, rates.counts_g0);
        let overall_tpr = (a.tp + b.tp) as f64 / (a.tp + a.fn_ + b.tp + b.fn_) as f64;
        Self {
            tpr_diff_sq,
            fpr_diff_sq,
            eod_sq: tpr_diff_sq + fpr_diff_sq,
            tpr_diff_abs,
            fpr_diff_abs,
            eod_reported: (tpr_diff_abs + fpr_diff_abs) / 2.0,
            overall_tpr,
            rates,
        }
    }

    pub fn eod(&self, variant: EodVariant) -> f64 {
        match variant {
            EodVariant::SquaredSum => self.eod_sq,
            EodVariant::MeanAbs => self.eod_reported,
        }
    }
}

pub fn eod_squared(preds: &[u8], y: &[u8], z: &[u8]) -> Result<FairnessMetrics> {
    group_rates(preds, y, z).map(FairnessMetrics::from_rates)
}

/// Fairness metrics of a thresholded model on `(x, y, z)`.
pub fn model_fairness(model: &ModelWeights, x: &Matrix, y: &[u8], z: &[u8]) -> Result<FairnessMetrics> {
    eod_squared(&classify(model, x)?, y, z)
}

/// `F = E(fair) - E(lg)` with the squared-sum EOD; negative means the fair
/// model is fairer.
pub fn fairness_improvement(
    x: &Matrix,
    y: &[u8],
    z: &[u8],
    model_lg: &ModelWeights,
    model_fair: &ModelWeights,
) -> Result<f64> {
    let lg = model_fairness(model_lg, x, y, z)?;
    let fair = model_fairness(model_fair, x, y, z)?;
    Ok(fair.eod_sq - lg.eod_sq)
}
