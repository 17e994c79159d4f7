/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Runtime(_) => EXIT_RUNTIME,
            Self::Acceptance(_) => EXIT_ACCEPTANCE,
        }
    }
}

impl From<nlac_gateway::Error> for CliError {
    fn from(e: nlac_gateway::Error) -> Self {
        match e {
            nlac_gateway::Error::Config(m) => Self::Config(m),
            nlac_gateway::Error::MissingToken(v) => Self::Config(format!("environment variable {v} is not set")),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<nlac_envs::Error> for CliError {
    fn from(e: nlac_envs::Error) -> Self {
        match e {
            nlac_envs::Error::UnknownSpec(m) => Self::Config(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<nlac_pipeline::Error> for CliError {
    fn from(e: nlac_pipeline::Error) -> Self {
        match e {
            nlac_pipeline::Error::Config(m) => Self::Config(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<nlac_core::Error> for CliError {
    fn from(e: nlac_core::Error) -> Self {
        match e {
            nlac_core::Error::Config(m) => Self::Config(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
