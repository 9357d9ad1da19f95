//! Softmax confidence as an epistemic uncertainty signal, studied on
//! final-layer features.
//!
//! The crate scores features with max-probability, entropy, cooled-entropy
//! and mixture-density estimators, computes the regions of feature space a
//! head is guaranteed to flag as uncertain, generates and audits head
//! structures, attributes OOD-detection failures and trains small reference
//! networks for end-to-end experiments.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod features;
pub mod geometry;
pub mod gmm;
pub mod head;
pub mod metrics;
pub mod refnet;
pub mod rng;
pub mod structure;

pub use error::{Error, ErrorKind, Result};
pub use features::{FeatureFormat, FeatureMatrix, LabelVector};
pub use gmm::{EmConfig, GaussianMixture};
pub use head::{decompose, softmax, AngleDecomposition, SoftmaxHead};
