use std::time::Duration;

use apilab_core::featurizer::FeatureVector;
use apilab_core::oracle::{ClassifyResponse, LabelOracle, OracleError};

use crate::{ClassifyRequest, ErrorBody, RateLimitedBody};

/// Blocking client for the classify endpoint. Never retries on its own.
#[derive(Debug, Clone)]
pub struct HttpOracle {
    agent: ureq::Agent,
    base: String,
}

impl HttpOracle {
    pub fn new(base_url: &str) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(30))
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        Self {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            base: base_url.trim_end_matches('/').to_string(),
        }
    }

    pub fn healthy(&self) -> bool {
        matches!(self.agent.get(&format!("{}/healthz", self.base)).call(), Ok(r) if r.status() == 200)
    }
}

impl LabelOracle for HttpOracle {
    fn query(&mut self, features: &FeatureVector) -> Result<ClassifyResponse, OracleError> {
        let request = ClassifyRequest {
            counts: features.0.clone(),
        };
        match self.agent.post(&format!("{}/classify", self.base)).send_json(&request) {
            Ok(response) => response
                .into_json::<ClassifyResponse>()
                .map_err(|e| OracleError::Network(format!("unreadable response: {e}"))),
            Err(ureq::Error::Status(429, response)) => {
                let body: RateLimitedBody = response
                    .into_json()
                    .map_err(|e| OracleError::Network(format!("unreadable 429 body: {e}")))?;
                Err(OracleError::RateLimited {
                    retry_after_seconds: body.retry_after_seconds,
                })
            }
            Err(ureq::Error::Status(400, response)) => {
                let message = response
                    .into_json::<ErrorBody>()
                    .map(|b| b.error)
                    .unwrap_or_else(|e| format!("unreadable 400 body: {e}"));
                Err(OracleError::BadRequest(message))
            }
            Err(ureq::Error::Status(code, _)) => Err(OracleError::Network(format!("unexpected status {code}"))),
            Err(ureq::Error::Transport(t)) => Err(OracleError::Network(t.to_string())),
        }
    }
}
