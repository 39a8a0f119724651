//! Exact Shapley values for a linear model on the margin (log-odds) scale,
//! assuming independent features: `shap_ij = theta_j * (x_ij - mean_j)`.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::logistic::ModelWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRank {
    pub feature: String,
    pub mean_abs: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapReport {
    pub feature_names: Vec<String>,
    /// Row-major, one row per explained sample.
    pub values: Matrix,
    /// `theta . mean(background) + b`.
    pub base_value: f64,
    pub background_mean: Vec<f64>,
    /// Same order as `feature_names`.
    pub ranking: Vec<ShapRank>,
}

impl ShapReport {
    /// Base value plus the row's attributions; equals the model margin.
    pub fn reconstructed_margin(&self, row: usize) -> f64 {
        self.base_value + self.values.row(row).iter().sum::<f64>()
    }
}

pub fn linear_shap(model: &ModelWeights, x: &Matrix, background: &Matrix) -> Result<ShapReport> {
    let m = model.n_features();
    if background.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    for (context, found) in [("shap input", x.cols()), ("shap background", background.cols())] {
        if found != m {
            return Err(Error::DimensionMismatch {
                context,
                expected: m,
                found,
            });
        }
    }
    let n_bg = background.rows() as f64;
    let mut bg_mean = alloc::vec![0.0; m];
    for row in background.rows_iter() {
        for (acc, v) in bg_mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for v in &mut bg_mean {
        *v /= n_bg;
    }
    let base_value = model.intercept
        + model
            .coefficients
            .iter()
            .zip(&bg_mean)
            .map(|(t, mu)| t * mu)
            .sum::<f64>();

    let mut values = Matrix::zeros(x.rows(), m);
    let mut abs_sum = alloc::vec![0.0; m];
    for (i, row) in x.rows_iter().enumerate() {
        for j in 0..m {
            let s = model.coefficients[j] * (row[j] - bg_mean[j]);
            values.set(i, j, s);
            abs_sum[j] += s.abs();
        }
    }
    let denom = x.rows().max(1) as f64;
    let mut ranking: Vec<ShapRank> = model
        .feature_names
        .iter()
        .zip(abs_sum)
        .map(|(f, a)| ShapRank {
            feature: f.clone(),
            mean_abs: a / denom,
            rank: 0,
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| ranking[b].mean_abs.total_cmp(&ranking[a].mean_abs));
    for (r, &i) in order.iter().enumerate() {
        ranking[i].rank = r + 1;
    }
    Ok(ShapReport {
        feature_names: model.feature_names.clone(),
        values,
        base_value,
        background_mean: bg_mean,
        ranking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistic::predict_margin;
    use alloc::vec;
    use proptest::prelude::*;

    fn model(theta: Vec<f64>, b: f64) -> ModelWeights {
        let names = (0..theta.len()).map(|i| alloc::format!("f{i}")).collect();
        ModelWeights::new(names, theta, b).unwrap()
    }

    #[test]
    fn closed_form_example() {
        let w = model(vec![2.0], 0.0);
        let bg = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let x = Matrix::from_rows(&[[3.0]]).unwrap();
        let r = linear_shap(&w, &x, &bg).unwrap();
        assert_eq!(r.values.get(0, 0), 4.0);
        assert_eq!(r.base_value, 2.0);
        assert_eq!(r.reconstructed_margin(0), 6.0);
    }

    #[test]
    fn zero_model_has_zero_attributions() {
        let w = model(vec![0.0, 0.0], 1.5);
        let x = Matrix::from_rows(&[[1.0, -4.0], [2.0, 9.0]]).unwrap();
        let r = linear_shap(&w, &x, &x).unwrap();
        assert!(r.values.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(r.base_value, 1.5);
    }

    #[test]
    fn dimension_and_empty_errors() {
        let w = model(vec![1.0, 1.0], 0.0);
        let good = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let bad = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(matches!(linear_shap(&w, &bad, &good), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(linear_shap(&w, &good, &bad), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(linear_shap(&w, &good, &Matrix::zeros(0, 2)), Err(Error::EmptyDataset)));
    }

    proptest! {
        #[test]
        fn additivity(theta in prop::collection::vec(-5.0f64..5.0, 3),
                      b in -3.0f64..3.0,
                      rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..30)) {
            let w = model(theta, b);
            let x = Matrix::from_rows(&rows).unwrap();
            let r = linear_shap(&w, &x, &x).unwrap();
            let margins = predict_margin(&w, &x).unwrap();
            for (i, m) in margins.iter().enumerate() {
                prop_assert!((r.reconstructed_margin(i) - m).abs() < 1e-10);
            }
        }

        #[test]
        fn standardization_leaves_values_unchanged(
            theta in prop::collection::vec(-3.0f64..3.0, 2),
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 2..20),
            scale in prop::collection::vec(0.1f64..10.0, 2),
            shift in prop::collection::vec(-5.0f64..5.0, 2),
        ) {
            // raw x = shift + scale * x_std, so theta_std = theta_raw * scale
            let x_std = Matrix::from_rows(&rows).unwrap();
            let raw_rows: Vec<Vec<f64>> = rows.iter()
                .map(|r| r.iter().enumerate().map(|(j, v)| shift[j] + scale[j] * v).collect())
                .collect();
            let x_raw = Matrix::from_rows(&raw_rows).unwrap();
            let theta_std: Vec<f64> = theta.iter().zip(&scale).map(|(t, s)| t * s).collect();
            let a = linear_shap(&model(theta, 0.0), &x_raw, &x_raw).unwrap();
            let b = linear_shap(&model(theta_std, 0.0), &x_std, &x_std).unwrap();
            for (u, v) in a.values.as_slice().iter().zip(b.values.as_slice()) {
                prop_assert!((u - v).abs() < 1e-8);
            }
        }
    }
}
