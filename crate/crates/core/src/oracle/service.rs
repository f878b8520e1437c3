use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use super::budget::{Clock, Decision, QueryBudget};
use super::target::TargetClassifier;
use super::{ClassifyResponse, LabelOracle, OracleError};
use crate::featurizer::FeatureVector;

fn retry_seconds(retry_after: Duration) -> u64 {
    let secs = retry_after.as_secs() + u64::from(retry_after.subsec_nanos() > 0);
    secs.max(1)
}

/// One metered classification. Malformed input is rejected before the quota is touched.
pub fn classify(
    target: &TargetClassifier,
    budget: &mut QueryBudget,
    now: Duration,
    features: &FeatureVector,
) -> Result<ClassifyResponse, OracleError> {
    target
        .check_dim(features)
        .map_err(|e| OracleError::BadRequest(e.to_string()))?;
    match budget.check_and_consume(now) {
        Decision::Deny { retry_after } => Err(OracleError::RateLimited {
            retry_after_seconds: retry_seconds(retry_after),
        }),
        Decision::Allow { remaining } => {
            let (label, score) = target
                .classify_unmetered(features)
                .map_err(|e| OracleError::BadRequest(e.to_string()))?;
            Ok(ClassifyResponse {
                label,
                score,
                remaining,
            })
        }
    }
}

/// Thread-safe classification service: a swappable frozen target behind one
/// serialized quota counter.
pub struct ClassifyService {
    target: RwLock<Arc<TargetClassifier>>,
    budget: Mutex<QueryBudget>,
    clock: Arc<dyn Clock>,
}

impl ClassifyService {
    pub fn new(target: TargetClassifier, budget: QueryBudget, clock: Arc<dyn Clock>) -> Self {
        Self {
            target: RwLock::new(Arc::new(target)),
            budget: Mutex::new(budget),
            clock,
        }
    }

    pub fn target(&self) -> Arc<TargetClassifier> {
        Arc::clone(&self.target.read().expect("target lock poisoned"))
    }

    /// Atomically replaces the frozen target; in-flight requests finish on the old one.
    pub fn replace_target(&self, target: TargetClassifier) {
        *self.target.write().expect("target lock poisoned") = Arc::new(target);
    }

    pub fn remaining(&self) -> u64 {
        let now = self.clock.now();
        self.budget.lock().expect("budget lock poisoned").remaining(now)
    }

    pub fn classify(&self, features: &FeatureVector) -> Result<ClassifyResponse, OracleError> {
        let target = self.target();
        let mut budget = self.budget.lock().expect("budget lock poisoned");
        let now = self.clock.now();
        classify(&target, &mut budget, now, features)
    }
}

impl LabelOracle for &ClassifyService {
    fn query(&mut self, features: &FeatureVector) -> Result<ClassifyResponse, OracleError> {
        self.classify(features)
    }
}

impl LabelOracle for Arc<ClassifyService> {
    fn query(&mut self, features: &FeatureVector) -> Result<ClassifyResponse, OracleError> {
        self.classify(features)
    }
}
