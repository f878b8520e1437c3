//! HTTP front end for [`ClassifyService`] and the matching blocking client.
//!
//! Wire protocol:
//!
//! | request | response |
//! |---|---|
//! | `POST /classify` `{"counts": [u32; dim]}` | `200 {"label": 1\|2, "score": f64, "remaining": u64}` |
//! | quota exhausted | `429 {"retry_after_seconds": u64}` plus a `Retry-After` header |
//! | malformed body or wrong dimension | `400 {"error": "..."}`, no quota consumed |
//! | `GET /healthz` | `200 ok` |

mod client;
mod server;

pub use client::HttpOracle;
pub use server::{router, serve, spawn_background, RunningServer};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimitedBody {
    pub retry_after_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server runtime: {0}")]
    Runtime(#[from] std::io::Error),
}
