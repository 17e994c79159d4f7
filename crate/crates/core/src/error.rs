use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mdp: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("{what} did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("state {0} out of range")]
    StateOutOfRange(usize),

    #[error("action {0} out of range")]
    ActionOutOfRange(usize),

    #[error("successor model has no entry for reachable pair (state {state}, action {action})")]
    MissingModelEntry { state: usize, action: usize },

    #[error("no transitions observed for pair (state {state}, action {action})")]
    Uncovered { state: usize, action: usize },

    #[error("evaluator needs at least one description")]
    NoDescriptions,

    #[error("model assigns zero mass to target description {description}")]
    ZeroModelMass { description: String },

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("replay buffer has no record with positive sampling weight")]
    ZeroPriorityMass,

    #[error("parameter bundles differ in shape ({left} vs {right})")]
    ShapeMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
