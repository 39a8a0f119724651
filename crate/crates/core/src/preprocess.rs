//! Cohort cleaning: race binarization, interpercentile filtering,
//! standardization and stratified fold assignment.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::seed;

/// Raw race strings that map to the White group, and strings that mean the
/// race is not recorded. Matching ignores ASCII case and surrounding blanks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RaceAliases {
    pub white: Vec<String>,
    pub unknown: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaceCode {
    /// Z = 1.
    White,
    /// Z = 0.
    NonWhite,
    /// No definitive race record; the row is dropped.
    Rejected,
}

impl RaceCode {
    pub fn indicator(self) -> Option<u8> {
        match self {
            RaceCode::White => Some(1),
            RaceCode::NonWhite => Some(0),
            RaceCode::Rejected => None,
        }
    }
}

pub fn binarize_race(raw: &str, aliases: &RaceAliases) -> RaceCode {
    let raw = raw.trim();
    let matches = |list: &[String]| list.iter().any(|a| a.trim().eq_ignore_ascii_case(raw));
    if raw.is_empty() || matches(&aliases.unknown) {
        RaceCode::Rejected
    } else if matches(&aliases.white) {
        RaceCode::White
    } else {
        RaceCode::NonWhite
    }
}

/// Quantile of already sorted values with linear interpolation between the
/// closest order statistics (position `(n - 1) * p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Inclusive per-feature bounds; `None` marks an exempt column.
pub type FeatureBounds = Vec<Option<(f64, f64)>>;

#[derive(Debug, Clone)]
pub struct Filtered {
    pub dataset: Dataset,
    pub bounds: FeatureBounds,
    pub removed: usize,
}

/// Computes `[q(low), q(high)]` for every non-exempt column over the whole
/// population.
pub fn interpercentile_bounds(d: &Dataset, low: f64, high: f64, exempt: &[usize]) -> Result<FeatureBounds> {
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low >= high {
        return Err(Error::InvalidRange { low, high });
    }
    Ok((0..d.n_features())
        .map(|j| {
            if exempt.contains(&j) {
                None
            } else {
                let mut col = d.features().column(j);
                col.sort_by(f64::total_cmp);
                Some((quantile_sorted(&col, low), quantile_sorted(&col, high)))
            }
        })
        .collect())
}

/// Keeps the rows whose every bounded feature lies inside its bounds.
pub fn apply_bounds(d: &Dataset, bounds: &FeatureBounds) -> Result<Filtered> {
    if bounds.len() != d.n_features() {
        return Err(Error::DimensionMismatch {
            context: "filter bounds",
            expected: d.n_features(),
            found: bounds.len(),
        });
    }
    let keep: Vec<usize> = d
        .features()
        .rows_iter()
        .enumerate()
        .filter(|(_, row)| {
            row.iter().zip(bounds).all(|(&x, b)| match b {
                Some((lo, hi)) => *lo <= x && x <= *hi,
                None => true,
            })
        })
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Filtered {
        removed: d.n_rows() - keep.len(),
        dataset: d.select_rows(&keep)?,
        bounds: bounds.clone(),
    })
}

/// Drops every row holding a value outside the `[low, high]` interpercentile
/// range of its column. Columns listed in `exempt` (binary codes) are never
/// filtered.
pub fn filter_interpercentile(d: &Dataset, low: f64, high: f64, exempt: &[usize]) -> Result<Filtered> {
    let bounds = interpercentile_bounds(d, low, high, exempt)?;
    apply_bounds(d, &bounds)
}

/// Per-feature affine standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

impl ScalerParams {
    /// Sample mean and sample standard deviation of each column. Columns in
    /// `passthrough` get the identity transform.
    pub fn fit(d: &Dataset, passthrough: &[usize]) -> Result<Self> {
        let m = d.n_features();
        let mut means = Vec::with_capacity(m);
        let mut stddevs = Vec::with_capacity(m);
        for j in 0..m {
            if passthrough.contains(&j) {
                means.push(0.0);
                stddevs.push(1.0);
                continue;
            }
            let col = d.features().column(j);
            let sd = crate::math::sample_std(&col);
            if !(sd > 0.0) {
                return Err(Error::ZeroVariance(d.feature_names()[j].clone()));
            }
            means.push(crate::math::mean(&col));
            stddevs.push(sd);
        }
        Ok(Self { means, stddevs })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            means: alloc::vec![0.0; m],
            stddevs: alloc::vec![1.0; m],
        }
    }

    fn check(&self, cols: usize) -> Result<()> {
        if self.means.len() != cols || self.stddevs.len() != cols {
            return Err(Error::DimensionMismatch {
                context: "scaler parameters",
                expected: cols,
                found: self.means.len(),
            });
        }
        if let Some(j) = self.stddevs.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "scaler stddev for column {j} must be positive"
            )));
        }
        Ok(())
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x.cols())?;
        let mut out = x.clone();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                out.set(i, j, (x.get(i, j) - self.means[j]) / self.stddevs[j]);
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x.cols())?;
        let mut out = x.clone();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                out.set(i, j, x.get(i, j) * self.stddevs[j] + self.means[j]);
            }
        }
        Ok(out)
    }
}

/// Standardizes `d`. Without `params` they are fitted on `d` (a training
/// split); with `params` they are applied unchanged (a held-out split).
pub fn standardize(
    d: &Dataset,
    params: Option<&ScalerParams>,
    passthrough: &[usize],
) -> Result<(Dataset, ScalerParams)> {
    let params = match params {
        Some(p) => p.clone(),
        None => ScalerParams::fit(d, passthrough)?,
    };
    let x = params.transform(d.features())?;
    Ok((d.with_features(x)?, params))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_ids: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    /// Ascending (train, test) row indices for fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &id) in self.fold_ids.iter().enumerate() {
            if id == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_size(&self, f: usize) -> usize {
        self.fold_ids.iter().filter(|&&id| id == f).count()
    }
}

/// Stratified k-fold assignment: each class is shuffled with a seeded
/// generator and dealt round-robin, the second class continuing where the
/// first stopped so fold sizes stay balanced.
pub fn stratified_kfold(d: &Dataset, k: usize, seed_value: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidFoldCount(k));
    }
    let mut rng = seed::rng(seed::derive(seed_value, 0x4b46_4f4c_44, 0));
    let mut fold_ids = alloc::vec![usize::MAX; d.n_rows()];
    let mut next = 0usize;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..d.n_rows()).filter(|&i| d.labels()[i] == class).collect();
        if idx.len() < k {
            return Err(Error::TooFewForFolds {
                class,
                count: idx.len(),
                folds: k,
            });
        }
        for i in (1..idx.len()).rev() {
            let r = rng.random_range(0..=i);
            idx.swap(i, r);
        }
        for i in idx {
            fold_ids[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { fold_ids, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn aliases() -> RaceAliases {
        RaceAliases {
            white: vec!["WHITE".into(), "WHITE - OTHER EUROPEAN".into()],
            unknown: vec!["UNKNOWN".into(), "UNABLE TO OBTAIN".into()],
        }
    }

    fn dataset(cols: &[Vec<f64>], labels: Vec<u8>) -> Dataset {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let names = (0..cols.len()).map(|j| alloc::format!("c{j}")).collect();
        let group = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, group, names).unwrap()
    }

    #[test]
    fn race_binarization() {
        let a = aliases();
        assert_eq!(binarize_race("WHITE", &a), RaceCode::White);
        assert_eq!(binarize_race("white ", &a), RaceCode::White);
        assert_eq!(binarize_race("White - Other European", &a), RaceCode::White);
        assert_eq!(binarize_race("ASIAN", &a), RaceCode::NonWhite);
        assert_eq!(binarize_race("UNKNOWN", &a), RaceCode::Rejected);
        assert_eq!(binarize_race("", &a), RaceCode::Rejected);
        assert_eq!(RaceCode::White.indicator(), Some(1));
        assert_eq!(RaceCode::Rejected.indicator(), None);
    }

    #[test]
    fn constant_median_column_keeps_every_row() {
        let d = dataset(&[vec![5.0; 20]], vec![0; 20]);
        let f = filter_interpercentile(&d, 0.02, 0.98, &[]).unwrap();
        assert_eq!(f.removed, 0);
        assert_eq!(f.dataset.n_rows(), 20);
    }

    /// Sort-and-index oracle: rank r (0-based) of n sorted values sits at
    /// probability r / (n - 1).
    #[test]
    fn hundred_distinct_values_lose_their_extremes() {
        let values: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64 * 1.5 + 10.0).collect();
        let d = dataset(&[values.clone()], vec![0; 100]);
        let f = filter_interpercentile(&d, 0.02, 0.98, &[]).unwrap();

        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        // h = 99 * 0.02 = 1.98 -> between ranks 1 and 2; h = 99 * 0.98 = 97.02 -> ranks 97, 98
        let lo = sorted[1] + 0.98 * (sorted[2] - sorted[1]);
        let hi = sorted[97] + 0.02 * (sorted[98] - sorted[97]);
        let expected: Vec<f64> = values.iter().copied().filter(|v| lo <= *v && *v <= hi).collect();
        assert_eq!(expected.len(), 96);
        assert_eq!(f.dataset.features().column(0), expected);
        assert_eq!(f.removed, 4);
    }

    #[test]
    fn degenerate_range_is_rejected() {
        let d = dataset(&[vec![1.0, 2.0, 3.0]], vec![0, 1, 0]);
        assert!(matches!(
            filter_interpercentile(&d, 0.5, 0.5, &[]),
            Err(Error::InvalidRange { .. })
        ));
    }

    #[test]
    fn binary_columns_are_exempt() {
        let mut bin = vec![0.0; 50];
        bin[10] = 1.0;
        let cont: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let d = dataset(&[cont, bin], vec![0; 50]);
        let f = filter_interpercentile(&d, 0.02, 0.98, &d.binary_columns()).unwrap();
        // rows 0 and 49 hold the continuous extremes; row 10 (the lone 1) survives
        assert_eq!(f.removed, 2);
        assert!(f.bounds[1].is_none());
        assert_eq!(f.dataset.features().column(1).iter().sum::<f64>(), 1.0);

        let unexempt = filter_interpercentile(&d, 0.02, 0.98, &[]).unwrap();
        assert_eq!(unexempt.removed, 3);
    }

    #[test]
    fn fixed_bounds_applied_twice_remove_nothing_more() {
        let values: Vec<f64> = (0..200).map(|i| libm::sin(i as f64) * 10.0).collect();
        let other: Vec<f64> = (0..200).map(|i| libm::cos(i as f64 * 0.7)).collect();
        let d = dataset(&[values, other], vec![0; 200]);
        let first = filter_interpercentile(&d, 0.02, 0.98, &[]).unwrap();
        let second = apply_bounds(&first.dataset, &first.bounds).unwrap();
        assert!(first.removed > 0);
        assert_eq!(second.removed, 0);
    }

    #[test]
    fn standardize_uses_sample_std_and_inverts() {
        let d = dataset(&[vec![1.0, 2.0, 3.0]], vec![0, 1, 0]);
        let (s, p) = standardize(&d, None, &[]).unwrap();
        assert_eq!(p.means, vec![2.0]);
        assert_eq!(p.stddevs, vec![1.0]);
        assert_eq!(s.features().column(0), vec![-1.0, 0.0, 1.0]);

        let (twice, _) = standardize(&s, Some(&p), &[]).unwrap();
        assert_ne!(twice.features(), s.features());

        let back = p.inverse(s.features()).unwrap();
        for (a, b) in back.as_slice().iter().zip(d.features().as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_rejects_constant_column_and_honours_passthrough() {
        let d = dataset(&[vec![4.0, 4.0, 4.0], vec![1.0, 0.0, 1.0]], vec![0, 1, 0]);
        assert!(matches!(standardize(&d, None, &[]), Err(Error::ZeroVariance(n)) if n == "c0"));
        let (s, p) = standardize(&d, None, &[0, 1]).unwrap();
        assert_eq!(s.features(), d.features());
        assert_eq!(p, ScalerParams::identity(2));
    }

    #[test]
    fn kfold_ten_rows_five_positive() {
        let labels = vec![1, 0, 1, 0, 1, 0, 1, 0, 1, 0];
        let d = dataset(&[(0..10).map(|i| i as f64).collect()], labels.clone());
        let a = stratified_kfold(&d, 5, 3).unwrap();
        for f in 0..5 {
            let (_, test) = a.split(f);
            assert_eq!(test.len(), 2);
            assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 1);
        }
        assert_eq!(a, stratified_kfold(&d, 5, 3).unwrap());
    }

    #[test]
    fn kfold_rejects_small_class_and_small_k() {
        let d = dataset(&[vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]], vec![1, 0, 0, 0, 0, 0]);
        assert!(matches!(
            stratified_kfold(&d, 5, 0),
            Err(Error::TooFewForFolds { class: 1, count: 1, folds: 5 })
        ));
        assert!(matches!(stratified_kfold(&d, 1, 0), Err(Error::InvalidFoldCount(1))));
    }

    proptest! {
        #[test]
        fn kfold_is_a_stratified_partition(
            labels in prop::collection::vec(0u8..2, 20..200),
            k in 2usize..7,
            seed_value in any::<u64>(),
        ) {
            let pos = labels.iter().filter(|&&y| y == 1).count();
            prop_assume!(pos >= k && labels.len() - pos >= k);
            let n = labels.len();
            let d = dataset(&[(0..n).map(|i| i as f64).collect()], labels.clone());
            let a = stratified_kfold(&d, k, seed_value).unwrap();
            let mut seen = vec![0usize; n];
            for f in 0..k {
                let (train, test) = a.split(f);
                prop_assert!(!test.is_empty());
                prop_assert_eq!(train.len() + test.len(), n);
                for &i in &test { seen[i] += 1; }
                let fold_pos = test.iter().filter(|&&i| labels[i] == 1).count() as f64;
                let expected = test.len() as f64 * pos as f64 / n as f64;
                prop_assert!((fold_pos - expected).abs() <= 1.0);
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn interpolated_quantile_is_bracketed_by_order_statistics(
            mut v in prop::collection::vec(-1e6f64..1e6, 1..60),
            p in 0.0f64..=1.0,
        ) {
            v.sort_by(f64::total_cmp);
            let q = quantile_sorted(&v, p);
            let h = (v.len() - 1) as f64 * p;
            let lo = v[libm::floor(h) as usize];
            let hi = v[(libm::ceil(h) as usize).min(v.len() - 1)];
            prop_assert!(lo <= q && q <= hi);
        }
    }
}
