//! Synthetic sepsis-like cohorts with controllable group disparity.
//!
//! Rows are drawn independently: group indicator first, then every feature in
//! spec order, then the outcome `Y ~ Bernoulli(sigmoid(theta . x + b))`. The
//! disparity mechanism runs afterwards on its own generator stream, so the
//! same seed yields the same clean cohort with or without disparity.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::seed;

/// Feature that carries the group disparity in [`CohortSpec::mediated_default`].
pub const MEDIATOR: &str = "sofa";

const TAG_ROWS: u64 = 0x5359_4e54_4852_4f57;
const TAG_DISPARITY: u64 = 0x5359_4e54_4449_5350;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureDistribution {
    Normal { mean: f64, std: f64 },
    Bernoulli { p: f64 },
    Uniform { low: f64, high: f64 },
    /// Copies the row's group indicator, for a race column the model can see.
    GroupIndicator,
}

/// Shift added to a feature for rows of one group before the outcome is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupShift {
    pub group: u8,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub distribution: FeatureDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_shift: Option<GroupShift>,
}

impl FeatureSpec {
    pub fn new(name: &str, distribution: FeatureDistribution) -> Self {
        Self {
            name: name.to_string(),
            distribution,
            group_shift: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Disparity {
    #[default]
    None,
    /// Each label in `group` is flipped with probability `flip_rate`.
    LabelNoise { group: u8, flip_rate: f64 },
    /// `delta` is added to `feature` for rows in `group` after the outcome is
    /// drawn, so the shift carries no outcome information.
    FeatureShift { feature: String, group: u8, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub n: usize,
    pub features: Vec<FeatureSpec>,
    /// One generating coefficient per feature, in raw feature units.
    pub true_theta: Vec<f64>,
    pub intercept: f64,
    #[serde(default)]
    pub disparity: Disparity,
    /// Probability that a row belongs to group 0 (Non-White).
    pub group_fraction: f64,
    pub seed: u64,
}

fn invalid(msg: String) -> Error {
    Error::InvalidConfig(msg)
}

impl CohortSpec {
    /// The 15-feature sepsis-like menu: admission vitals, labs and severity
    /// scores in their usual clinical units, with a base rate near 16.5%.
    pub fn sepsis_default(n: usize, seed: u64) -> Self {
        use FeatureDistribution::{Bernoulli, GroupIndicator, Normal};
        let menu: [(&str, FeatureDistribution, f64); 15] = [
            ("age", Normal { mean: 66.0, std: 16.0 }, 0.03),
            ("gender", Bernoulli { p: 0.56 }, 0.05),
            ("race", GroupIndicator, 0.0),
            ("temperature", Normal { mean: 37.0, std: 0.9 }, -0.15),
            ("weight_admit", Normal { mean: 82.0, std: 24.0 }, -0.005),
            ("heart_rate", Normal { mean: 92.0, std: 19.0 }, 0.012),
            ("glucose", Normal { mean: 140.0, std: 50.0 }, 0.002),
            ("sbp", Normal { mean: 118.0, std: 20.0 }, -0.008),
            ("dbp", Normal { mean: 63.0, std: 14.0 }, -0.005),
            ("spo2", Normal { mean: 96.5, std: 2.5 }, -0.06),
            ("resp_rate", Normal { mean: 20.0, std: 5.0 }, 0.04),
            ("rrt", Bernoulli { p: 0.08 }, 0.6),
            ("sofa", Normal { mean: 6.0, std: 3.2 }, 0.12),
            ("charlson_comorbidity_index", Normal { mean: 5.5, std: 2.9 }, 0.08),
            ("apsiii", Normal { mean: 55.0, std: 22.0 }, 0.02),
        ];
        let (features, true_theta) = menu
            .into_iter()
            .map(|(name, dist, coef)| (FeatureSpec::new(name, dist), coef))
            .unzip();
        Self {
            n,
            features,
            true_theta,
            intercept: 4.63,
            disparity: Disparity::None,
            group_fraction: 0.166,
            seed,
        }
    }

    /// Default menu with label noise in group 0 at flip rate 0.3.
    pub fn biased_default(n: usize, seed: u64) -> Self {
        Self {
            disparity: Disparity::LabelNoise {
                group: 0,
                flip_rate: 0.3,
            },
            ..Self::sepsis_default(n, seed)
        }
    }

    /// Default menu without the race column, with `delta = 3` added to
    /// `sofa` in group 0 after outcomes are drawn. `sofa` is then the only
    /// input that differs between groups, so it carries all disparity. With
    /// a visible race column the performance model would learn to undo the
    /// shift and there would be nothing left to mediate.
    pub fn mediated_default(n: usize, seed: u64) -> Self {
        let mut spec = Self::sepsis_default(n, seed);
        let r = spec.feature_index("race").expect("menu contains race");
        spec.features.remove(r);
        spec.true_theta.remove(r);
        spec.disparity = Disparity::FeatureShift {
            feature: MEDIATOR.into(),
            group: 0,
            delta: 3.0,
        };
        spec
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.features.is_empty() {
            return Err(Error::NoFeatures);
        }
        if self.true_theta.len() != self.features.len() {
            return Err(Error::DimensionMismatch {
                context: "true_theta",
                expected: self.features.len(),
                found: self.true_theta.len(),
            });
        }
        if let Some(j) = self.true_theta.iter().position(|t| !t.is_finite()) {
            return Err(invalid(format!("true_theta[{j}] is not finite")));
        }
        if !self.intercept.is_finite() {
            return Err(invalid("intercept is not finite".into()));
        }
        if !(self.group_fraction > 0.0 && self.group_fraction < 1.0) {
            return Err(invalid(format!(
                "group_fraction must lie in (0, 1), got {}",
                self.group_fraction
            )));
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::DuplicateFeature(f.name.clone()));
            }
            let ok = match f.distribution {
                FeatureDistribution::Normal { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
                FeatureDistribution::Bernoulli { p } => (0.0..=1.0).contains(&p),
                FeatureDistribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
                FeatureDistribution::GroupIndicator => true,
            };
            if !ok {
                return Err(invalid(format!("invalid distribution parameters for '{}'", f.name)));
            }
            if let Some(s) = f.group_shift {
                check_group(s.group)?;
                if !s.delta.is_finite() {
                    return Err(invalid(format!("group shift for '{}' is not finite", f.name)));
                }
            }
        }
        match &self.disparity {
            Disparity::None => {}
            Disparity::LabelNoise { group, flip_rate } => {
                check_group(*group)?;
                if !(0.0..0.5).contains(flip_rate) {
                    return Err(invalid(format!("flip_rate must lie in [0, 0.5), got {flip_rate}")));
                }
            }
            Disparity::FeatureShift { feature, group, delta } => {
                check_group(*group)?;
                if self.feature_index(feature).is_none() {
                    return Err(invalid(format!("feature_shift names unknown feature '{feature}'")));
                }
                if !delta.is_finite() {
                    return Err(invalid("feature_shift delta is not finite".into()));
                }
            }
        }
        Ok(())
    }
}

fn check_group(g: u8) -> Result<()> {
    if g > 1 {
        return Err(invalid(format!("group must be 0 or 1, got {g}")));
    }
    Ok(())
}

pub fn generate_synthetic(spec: &CohortSpec) -> Result<Dataset> {
    spec.validate()?;
    let m = spec.features.len();
    let mut rng = seed::rng(seed::derive(spec.seed, TAG_ROWS, 0));
    let mut data = Vec::with_capacity(spec.n * m);
    let mut labels = Vec::with_capacity(spec.n);
    let mut group = Vec::with_capacity(spec.n);
    let mut row = alloc::vec![0.0; m];

    for _ in 0..spec.n {
        let z = u8::from(rng.random::<f64>() >= spec.group_fraction);
        for (slot, f) in row.iter_mut().zip(&spec.features) {
            let mut v = match f.distribution {
                FeatureDistribution::Normal { mean, std } => {
                    Normal::new(mean, std).map_err(|e| invalid(e.to_string()))?.sample(&mut rng)
                }
                FeatureDistribution::Bernoulli { p } => f64::from(u8::from(rng.random::<f64>() < p)),
                FeatureDistribution::Uniform { low, high } => rng.random_range(low..high),
                FeatureDistribution::GroupIndicator => f64::from(z),
            };
            if let Some(s) = f.group_shift {
                if s.group == z {
                    v += s.delta;
                }
            }
            *slot = v;
        }
        let margin = spec.intercept + row.iter().zip(&spec.true_theta).map(|(x, t)| x * t).sum::<f64>();
        labels.push(u8::from(rng.random::<f64>() < sigmoid(margin)));
        group.push(z);
        data.extend_from_slice(&row);
    }

    let mut drng = seed::rng(seed::derive(spec.seed, TAG_DISPARITY, 0));
    match &spec.disparity {
        Disparity::None => {}
        Disparity::LabelNoise { group: g, flip_rate } => {
            for (y, z) in labels.iter_mut().zip(&group) {
                // one draw per row keeps the stream aligned across groups
                let u: f64 = drng.random();
                if z == g && u < *flip_rate {
                    *y = 1 - *y;
                }
            }
        }
        Disparity::FeatureShift { feature, group: g, delta } => {
            let j = spec.feature_index(feature).expect("validated");
            for (i, z) in group.iter().enumerate() {
                if z == g {
                    data[i * m + j] += delta;
                }
            }
        }
    }

    let names = spec.features.iter().map(|f| f.name.clone()).collect();
    Dataset::new(Matrix::new(spec.n, m, data)?, labels, group, names)
}
