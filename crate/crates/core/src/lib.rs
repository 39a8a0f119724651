//! Fairness-aware logistic modelling.
//!
//! A performance-optimized logistic model is trained on binary cross-entropy,
//! its weights are transferred into a second model that is fine-tuned to
//! minimize the Equalized Odds Disparity between two groups under a band on
//! the overall true positive rate, and every feature is then scored by how
//! much shuffling it changes the fairness gap between the two models.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats,
//! parallel execution and the command line live in the `fairshift` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fairness;
pub mod importance;
pub mod logistic;
pub mod math;
pub mod preprocess;
pub mod roc;
pub mod seed;
pub mod shap;
pub mod synth;
pub mod transfer;

pub use dataset::{Dataset, Matrix};
pub use error::{Error, Result};
pub use fairness::{EodVariant, FairnessMetrics, GroupRates};
pub use logistic::{ModelWeights, TrainConfig};
pub use roc::RocCurve;
pub use transfer::{CoefficientDelta, FairTransferConfig};
