//! Naive reference implementations used as test oracles. They share no code
//! with the library beyond the seeded generator, so agreement is evidence
//! that both are right.
#![allow(dead_code)]

use fairshift_core::seed::permutation_rng;
use rand::Rng;

/// (tpr_g1, fpr_g1, tpr_g0, fpr_g0) from explicit confusion tallies.
pub fn rates(preds: &[u8], y: &[u8], z: &[u8]) -> (f64, f64, f64, f64) {
    let mut tally = [[[0usize; 2]; 2]; 2]; // [group][label][prediction]
    for i in 0..preds.len() {
        tally[z[i] as usize][y[i] as usize][preds[i] as usize] += 1;
    }
    let rate = |g: usize, label: usize| {
        let hit = tally[g][label][1] as f64;
        let total = (tally[g][label][0] + tally[g][label][1]) as f64;
        hit / total
    };
    (rate(1, 1), rate(1, 0), rate(0, 1), rate(0, 0))
}

pub fn eod_sq(preds: &[u8], y: &[u8], z: &[u8]) -> f64 {
    let (t1, f1, t0, f0) = rates(preds, y, z);
    (t1 - t0) * (t1 - t0) + (f1 - f0) * (f1 - f0)
}

pub fn has_all_cells(y: &[u8], z: &[u8]) -> bool {
    [(0, 0), (0, 1), (1, 0), (1, 1)]
        .iter()
        .all(|&(a, b)| y.iter().zip(z).any(|(&yy, &zz)| yy == a && zz == b))
}

/// Mann-Whitney statistic by comparing every positive with every negative.
pub fn auc_pairwise(scores: &[f64], y: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Scans every candidate threshold (each distinct score plus +inf), scoring
/// `s >= t` as positive, and keeps the point closest to (0, 1). Distances
/// within 1e-12 count as ties, resolved by higher TPR and then lower
/// threshold.
pub fn er_threshold_scan(scores: &[f64], y: &[u8]) -> f64 {
    let mut candidates: Vec<f64> = scores.to_vec();
    candidates.push(f64::INFINITY);
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let neg = y.len() as f64 - pos;
    let mut best: Option<(f64, f64, f64)> = None; // (dist2, tpr, threshold)
    for &t in &candidates {
        let tp = scores.iter().zip(y).filter(|(&s, &l)| s >= t && l == 1).count() as f64;
        let fp = scores.iter().zip(y).filter(|(&s, &l)| s >= t && l == 0).count() as f64;
        let tpr = tp / pos;
        let fpr = fp / neg;
        let d = (1.0 - tpr) * (1.0 - tpr) + fpr * fpr;
        best = match best {
            None => Some((d, tpr, t)),
            Some((bd, btpr, bt)) => {
                let better = if (d - bd).abs() <= 1e-12 {
                    tpr > btpr || (tpr == btpr && t < bt)
                } else {
                    d < bd
                };
                if better {
                    Some((d, tpr, t))
                } else {
                    Some((bd, btpr, bt))
                }
            }
        };
    }
    best.unwrap().2
}

/// Logistic probability computed directly from the formula.
pub fn prob(theta: &[f64], b: f64, row: &[f64]) -> f64 {
    let m: f64 = theta.iter().zip(row).map(|(t, x)| t * x).sum::<f64>() + b;
    1.0 / (1.0 + (-m).exp())
}

/// Shuffles `col` the way the permutation routine is specified to: a
/// Durstenfeld pass on the (master_seed, feature, repetition) stream.
pub fn shuffle(col: &mut [f64], master_seed: u64, feature: usize, repetition: usize) {
    let mut rng = permutation_rng(master_seed, feature, repetition);
    let mut i = col.len();
    while i > 1 {
        i -= 1;
        let j: usize = rng.random_range(0..=i);
        col.swap(i, j);
    }
}

/// A thresholded logistic model in plain form.
pub struct PairModel<'a> {
    pub theta: &'a [f64],
    pub b: f64,
    pub t: f64,
}

pub fn fairness_f(rows: &[Vec<f64>], y: &[u8], z: &[u8], lg: &PairModel, fair: &PairModel) -> f64 {
    let preds = |m: &PairModel| -> Vec<u8> {
        rows.iter().map(|r| u8::from(prob(m.theta, m.b, r) >= m.t)).collect()
    };
    eod_sq(&preds(fair), y, z) - eod_sq(&preds(lg), y, z)
}

/// Permutation fairness importance from scratch on row-major data: returns
/// the unpermuted F and, per feature, the F of every shuffled repetition.
pub fn permutation_importance(
    rows: &[Vec<f64>],
    y: &[u8],
    z: &[u8],
    lg: &PairModel,
    fair: &PairModel,
    repetitions: usize,
    master_seed: u64,
) -> (f64, Vec<Vec<f64>>) {
    let m = rows[0].len();
    let baseline = fairness_f(rows, y, z, lg, fair);
    let mut out = Vec::new();
    for i in 0..m {
        let mut samples = Vec::new();
        for j in 0..repetitions {
            let mut col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            shuffle(&mut col, master_seed, i, j);
            let permuted: Vec<Vec<f64>> = rows
                .iter()
                .zip(&col)
                .map(|(r, &v)| {
                    let mut r = r.clone();
                    r[i] = v;
                    r
                })
                .collect();
            samples.push(fairness_f(&permuted, y, z, lg, fair));
        }
        out.push(samples);
    }
    (baseline, out)
}

/// Relative gradient error with a tiny floor for components near zero.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}
