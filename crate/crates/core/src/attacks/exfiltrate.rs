use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;
use crate::oracle::{LabelOracle, OracleError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum ExfiltrationStatus {
    Complete,
    RateLimited { retry_after_seconds: u64 },
    NetworkFailure { message: String },
}

/// Labelled samples gathered so far plus enough state to resume.
#[derive(Debug, Clone, PartialEq)]
pub struct Exfiltration {
    pub samples: Vec<LabeledSample>,
    /// Pool indices in query order; the first `cursor` have been answered.
    pub plan: Vec<usize>,
    pub cursor: usize,
    pub status: ExfiltrationStatus,
}

impl Exfiltration {
    pub fn calls_consumed(&self) -> usize {
        self.cursor
    }

    pub fn is_complete(&self) -> bool {
        self.status == ExfiltrationStatus::Complete
    }

    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::new(self.samples.clone())
    }

    /// Pool indices answered so far.
    pub fn queried(&self) -> &[usize] {
        &self.plan[..self.cursor]
    }

    /// Continues from the cursor. Only the label of each answer is kept.
    pub fn resume<O: LabelOracle>(&mut self, oracle: &mut O, pool: &[FeatureVector]) -> Result<()> {
        while self.cursor < self.plan.len() {
            let features = &pool[self.plan[self.cursor]];
            match oracle.query(features) {
                Ok(answer) => {
                    self.samples.push(LabeledSample::new(features.clone(), answer.label));
                    self.cursor += 1;
                }
                Err(OracleError::RateLimited { retry_after_seconds }) => {
                    self.status = ExfiltrationStatus::RateLimited { retry_after_seconds };
                    return Ok(());
                }
                Err(OracleError::Network(message)) => {
                    self.status = ExfiltrationStatus::NetworkFailure { message };
                    return Ok(());
                }
                Err(e @ OracleError::BadRequest(_)) => return Err(e.into()),
            }
        }
        self.status = ExfiltrationStatus::Complete;
        Ok(())
    }
}

/// Queries `budget` distinct pool samples, chosen uniformly with `seed`, and
/// labels them with the oracle's answers. Stops early on a rate-limit or
/// network failure and reports it in the status.
pub fn exploratory_attack<O: LabelOracle>(
    oracle: &mut O,
    pool: &[FeatureVector],
    budget: usize,
    seed: u64,
) -> Result<Exfiltration> {
    if pool.is_empty() {
        return Err(Error::validation("query pool is empty"));
    }
    if budget == 0 {
        return Err(Error::validation("query budget must be at least 1"));
    }
    if budget > pool.len() {
        return Err(Error::validation(format!(
            "query budget {budget} exceeds pool size {}",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = Exfiltration {
        samples: Vec::with_capacity(budget),
        plan: sample(&mut rng, pool.len(), budget).into_vec(),
        cursor: 0,
        status: ExfiltrationStatus::Complete,
    };
    run.resume(oracle, pool)?;
    Ok(run)
}
