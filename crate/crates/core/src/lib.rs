//! Desk-scale laboratory for attacking a rate-limited black-box classifier.
//!
//! The adversary queries a classification service under a call quota, trains
//! a substitute network on the returned labels, enlarges its training set with
//! a conditional GAN, and then uses the substitute's confidence scores to pick
//! label-flip (poisoning) and evasion samples.
//!
//! Modules:
//! - [`nn`]: dense feedforward networks, backpropagation, SGD-momentum and Adam.
//! - [`featurizer`]: text cleaning, vocabulary and word-count features.
//! - [`oracle`]: the mock target classifier, the call quota and the query interface.
//! - [`gan`]: the conditional GAN used for data augmentation.
//! - [`metrics`]: disagreement rates between two classifiers.
//! - [`attacks`]: extraction, hyperparameter search, augmentation, poisoning and evasion.

pub mod attacks;
pub mod dataset;
pub mod error;
pub mod featurizer;
pub mod fixture;
pub mod gan;
pub mod label;
pub mod metrics;
pub mod nn;
pub mod oracle;

pub use error::{Error, Result};
pub use label::Label;
