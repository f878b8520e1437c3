use std::path::{Path, PathBuf};

use apilab_service::ServiceError;

/// Process exit codes, one per error class.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const IO: i32 = 3;
    pub const NETWORK: i32 = 4;
    pub const RATE_LIMIT_EXHAUSTED: i32 = 5;
    pub const TRAINING_DIVERGED: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] apilab_core::Error),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("query quota exhausted after {obtained} of {requested} samples; retry after {retry_after_seconds} s")]
    RateLimitExhausted {
        obtained: usize,
        requested: usize,
        retry_after_seconds: u64,
    },
    #[error("oracle unreachable after {obtained} samples: {message}")]
    Network { obtained: usize, message: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use apilab_core::oracle::OracleError;
        use apilab_core::Error as E;
        match self {
            CliError::Manifest(_) => exit::VALIDATION,
            CliError::Io { .. } => exit::IO,
            CliError::RateLimitExhausted { .. } => exit::RATE_LIMIT_EXHAUSTED,
            CliError::Network { .. } => exit::NETWORK,
            CliError::Service(ServiceError::Bind { .. }) => exit::NETWORK,
            CliError::Service(ServiceError::Runtime(_)) => exit::INTERNAL,
            CliError::Core(e) => match e {
                E::Validation(_) | E::Shape(_) => exit::VALIDATION,
                E::Io { .. } | E::Format(_) => exit::IO,
                E::TrainingDiverged { .. } => exit::TRAINING_DIVERGED,
                E::Oracle(OracleError::RateLimited { .. }) => exit::RATE_LIMIT_EXHAUSTED,
                E::Oracle(OracleError::Network(_)) => exit::NETWORK,
                E::Oracle(OracleError::BadRequest(_)) => exit::VALIDATION,
            },
        }
    }
}

/// A failure tagged with the pipeline stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: CliError,
}

pub trait InStage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<CliError>> InStage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use apilab_core::oracle::OracleError;

    #[test]
    fn error_classes_have_distinct_codes() {
        let codes = [
            CliError::Manifest("x".into()).exit_code(),
            CliError::io(Path::new("p"), std::io::Error::other("x")).exit_code(),
            CliError::Network { obtained: 0, message: "x".into() }.exit_code(),
            CliError::RateLimitExhausted { obtained: 0, requested: 1, retry_after_seconds: 1 }.exit_code(),
            CliError::Core(apilab_core::Error::TrainingDiverged { epoch: 3 }).exit_code(),
        ];
        let mut sorted = codes.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), codes.len());
        assert!(!codes.contains(&exit::SUCCESS));
        assert_eq!(CliError::Core(OracleError::Network("x".into()).into()).exit_code(), exit::NETWORK);
    }
}
