//! The black-box target: a frozen classifier behind a call quota.
//!
//! [`ClassifyService`] is the in-process service; network transports wrap it
//! without changing its semantics. Adversary code only sees the
//! [`LabelOracle`] trait.

mod budget;
mod service;
mod target;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurizer::FeatureVector;
use crate::label::Label;

pub use budget::{Clock, Decision, ManualClock, QueryBudget, SystemClock, DEFAULT_LIMIT, DEFAULT_WINDOW};
pub use service::{classify, ClassifyService};
pub use target::{train_mock_target, NaiveBayes, TargetClassifier, TargetModel, TargetSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("rate limited; retry after {retry_after_seconds} s")]
    RateLimited { retry_after_seconds: u64 },
    #[error("request rejected: {0}")]
    BadRequest(String),
    #[error("network failure: {0}")]
    Network(String),
}

/// Successful answer of the classification endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub label: Label,
    /// Probability of label 2.
    pub score: f64,
    /// Calls left in the current window after this one.
    pub remaining: u64,
}

/// Query access to a classifier the adversary cannot inspect.
pub trait LabelOracle {
    fn query(&mut self, features: &FeatureVector) -> Result<ClassifyResponse, OracleError>;
}

impl<O: LabelOracle + ?Sized> LabelOracle for &mut O {
    fn query(&mut self, features: &FeatureVector) -> Result<ClassifyResponse, OracleError> {
        (**self).query(features)
    }
}
