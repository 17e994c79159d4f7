use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown environment spec: {0}")]
    UnknownSpec(String),

    #[error("episode is already done")]
    EpisodeDone,

    #[error("invalid environment data: {0}")]
    InvalidData(String),

    #[error("agent failed: {0}")]
    Agent(String),

    #[error(transparent)]
    Gateway(#[from] nlac_gateway::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
