//! Library half of the `apilab` binary: manifests, fixtures and the attack pipeline.

pub mod error;
pub mod fixtures;
pub mod io;
pub mod manifest;
pub mod pipeline;
