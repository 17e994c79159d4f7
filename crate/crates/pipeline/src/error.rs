use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {field}: {message}")]
    Schema { path: PathBuf, line: usize, field: String, message: String },
    #[error("{path}:{line}: unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { path: PathBuf, line: usize, found: u64, expected: u32 },
    #[error("duplicate transition (episode {episode_id}, step {step_index})")]
    Duplicate { episode_id: u64, step_index: u32 },
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("{failed} of {attempted} transitions failed, above the allowed rate {max_rate}")]
    FailureRate { failed: usize, attempted: usize, max_rate: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nlac_core::Error),
    #[error(transparent)]
    Gateway(#[from] nlac_gateway::Error),
    #[error(transparent)]
    Env(#[from] nlac_envs::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
