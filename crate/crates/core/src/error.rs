use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use thiserror::Error;

use crate::transfer::FairTransfer;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// One of the four (label, group) conditioning cells used by group rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub label: u8,
    pub group: u8,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Y={}, Z={}", self.label, self.group)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {context} at row {row}, column {col}")]
    NonFinite {
        context: &'static str,
        row: usize,
        col: usize,
    },
    #[error("{column} value {value} at row {row} is outside {{0, 1}}")]
    NotBinary {
        column: &'static str,
        row: usize,
        value: f64,
    },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("invalid quantile range [{low}, {high}]")]
    InvalidRange { low: f64, high: f64 },
    #[error("feature `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("label class {class} has {count} rows, fewer than the {folds} folds requested")]
    TooFewForFolds {
        class: u8,
        count: usize,
        folds: usize,
    },
    #[error("labels contain a single class ({0}); both classes are required")]
    SingleClass(u8),
    #[error("model threshold is not set")]
    ThresholdUnset,
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize },
    #[error("conditioning cell ({0}) is empty")]
    DegenerateCell(Cell),
    #[error("feature names of the two models differ")]
    FeatureMismatch,
    #[error("feature index {index} is out of range for {count} features")]
    FeatureIndex { index: usize, count: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "fair transfer did not improve: eod {eod_fair:.6} vs {eod_perf:.6}, overall TPR {tpr_fair:.4} vs anchor {anchor:.4}",
        eod_fair = .0.check.eod_fair,
        eod_perf = .0.check.eod_perf,
        tpr_fair = .0.check.tpr_fair,
        anchor = .0.check.tpr_anchor
    )]
    NonImproving(Box<FairTransfer>),
    #[error("{failed} of {total} folds could not be evaluated")]
    TooManySkippedFolds { failed: usize, total: usize },
}
