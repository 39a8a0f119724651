//! The canonical in-memory cohort.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix buffer",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, and a zero-column matrix has no data anyway
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Copies the listed rows, in the given order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Position of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / self.cols.max(1), p % self.cols.max(1)))
    }
}

/// Features `X`, labels `Y` (1 = died), group indicator `Z` (1 = White,
/// 0 = Non-White) and the feature column names.
///
/// Construction validates every invariant, so a `Dataset` in hand is always
/// finite, binary-labelled and consistently shaped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<u8>,
    group: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<u8>,
        group: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if features.cols() == 0 {
            return Err(Error::NoFeatures);
        }
        for (context, len) in [
            ("labels", labels.len()),
            ("group indicators", group.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    found: len,
                });
            }
        }
        if feature_names.len() != features.cols() {
            return Err(Error::DimensionMismatch {
                context: "feature names",
                expected: features.cols(),
                found: feature_names.len(),
            });
        }
        if let Some((row, col)) = features.first_non_finite() {
            return Err(Error::NonFinite {
                context: "features",
                row,
                col,
            });
        }
        check_binary("label", &labels)?;
        check_binary("group", &group)?;
        for (i, name) in feature_names.iter().enumerate() {
            if feature_names[..i].contains(name) {
                return Err(Error::DuplicateFeature(name.clone()));
            }
        }
        Ok(Self {
            features,
            labels,
            group,
            feature_names,
        })
    }

    /// Builds a dataset from real-valued label and group columns, rejecting
    /// anything other than exactly 0 or 1.
    pub fn from_real_columns(
        features: Matrix,
        labels: &[f64],
        group: &[f64],
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let labels = to_binary("label", labels)?;
        let group = to_binary("group", group)?;
        Self::new(features, labels, group, feature_names)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn group(&self) -> &[u8] {
        &self.group
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Columns whose values are all exactly 0 or 1.
    pub fn binary_columns(&self) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&j| {
                self.features
                    .rows_iter()
                    .all(|r| r[j] == 0.0 || r[j] == 1.0)
            })
            .collect()
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.features.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
            idx.iter().map(|&i| self.group[i]).collect(),
            self.feature_names.clone(),
        )
    }

    /// Same rows and labels with a replacement feature matrix.
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        Self::new(
            features,
            self.labels.clone(),
            self.group.clone(),
            self.feature_names.clone(),
        )
    }

    /// Same features and groups with replacement labels.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            labels,
            self.group.clone(),
            self.feature_names.clone(),
        )
    }

    /// Number of rows with label 1.
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}

fn check_binary(column: &'static str, values: &[u8]) -> Result<()> {
    match values.iter().position(|&v| v > 1) {
        Some(row) => Err(Error::NotBinary {
            column,
            row,
            value: f64::from(values[row]),
        }),
        None => Ok(()),
    }
}

fn to_binary(column: &'static str, values: &[f64]) -> Result<Vec<u8>> {
    values
        .iter()
        .enumerate()
        .map(|(row, &v)| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::NotBinary {
                    column,
                    row,
                    value: v,
                })
            }
        })
        .collect()
}
