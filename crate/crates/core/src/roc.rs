//! ROC curves, AUC and closest-to-(0,1) threshold selection.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive. The leading (0, 0) point
    /// carries `+inf`.
    pub threshold: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// Empirical ROC curve with one point per distinct score, ordered by
/// decreasing threshold, starting at (0, 0) and ending at (1, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: usize,
    pub negatives: usize,
}

pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "ROC labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            context: "ROC scores",
            row: i,
            col: 0,
        });
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 {
        return Err(Error::SingleClass(0));
    }
    if negatives == 0 {
        return Err(Error::SingleClass(1));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let point = |tp: usize, fp: usize, threshold: f64| RocPoint {
        fpr: fp as f64 / negatives as f64,
        tpr: tp as f64 / positives as f64,
        threshold,
        true_positives: tp,
        false_positives: fp,
    };
    let mut points = alloc::vec![point(0, 0, f64::INFINITY)];
    let (mut tp, mut fp) = (0, 0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(point(tp, fp, s));
    }
    Ok(RocCurve {
        points,
        positives,
        negatives,
    })
}

/// Trapezoidal area under the curve. The sum is accumulated in integer
/// counts, so the result equals the Mann-Whitney statistic with ties
/// counted as one half up to a single rounding.
pub fn auc(curve: &RocCurve) -> f64 {
    let mut twice_area: u128 = 0;
    for w in curve.points.windows(2) {
        let dfp = (w[1].false_positives - w[0].false_positives) as u128;
        twice_area += dfp * (w[0].true_positives + w[1].true_positives) as u128;
    }
    twice_area as f64 / (2.0 * curve.positives as f64 * curve.negatives as f64)
}

pub fn auc_from_scores(scores: &[f64], labels: &[u8]) -> Result<f64> {
    roc_curve(scores, labels).map(|c| auc(&c))
}

/// Squared distance to (0, 1) scaled by `(P N)^2`, exact in integers.
fn scaled_sq_distance(p: &RocPoint, pos: usize, neg: usize) -> u128 {
    let fp = p.false_positives as u128;
    let miss = (pos - p.true_positives) as u128;
    fp * fp * (pos as u128) * (pos as u128) + miss * miss * (neg as u128) * (neg as u128)
}

/// Index of the point closest to (0, 1); ties go to the higher TPR, then to
/// the lower threshold.
pub fn er_point(curve: &RocCurve) -> usize {
    let (pos, neg) = (curve.positives, curve.negatives);
    let mut best = 0;
    for (i, p) in curve.points.iter().enumerate().skip(1) {
        let b = &curve.points[best];
        let (dp, db) = (scaled_sq_distance(p, pos, neg), scaled_sq_distance(b, pos, neg));
        let better = dp < db
            || (dp == db
                && (p.true_positives > b.true_positives
                    || (p.true_positives == b.true_positives && p.threshold < b.threshold)));
        if better {
            best = i;
        }
    }
    best
}

/// Threshold of the ROC point nearest the ideal corner (0, 1).
pub fn er_threshold(curve: &RocCurve) -> f64 {
    curve.points[er_point(curve)].threshold
}

pub fn accuracy(predictions: &[u8], labels: &[u8]) -> f64 {
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}
