use thiserror::Error;

use crate::config::Behavior;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a reply failed to parse. Each variant has a stable [`code`](Self::code)
/// used by fixtures and record logs.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("missing section {0:?}")]
    MissingSection(&'static str),

    #[error("section {0:?} appears more than once")]
    DuplicateSection(&'static str),

    #[error("section {0:?} is empty")]
    EmptySection(&'static str),

    #[error("text before the {0:?} section")]
    Preamble(&'static str),

    #[error("unexpected text after the reply: {0:?}")]
    TrailingText(String),

    #[error("verdict must start with \"Yes\" or \"No\", got {0:?}")]
    InvalidVerdict(String),

    #[error("a \"Yes\" verdict must not carry an explanation")]
    UnexpectedExplanation,

    #[error("a \"No\" verdict needs an explanation")]
    MissingExplanation,

    #[error("action is not a JSON object with \"name\" and \"arguments\": {0}")]
    MalformedAction(String),

    #[error("arguments of action {action:?} are not a well-formed record: {reason}")]
    MalformedArguments { action: String, reason: String },

    #[error("unknown action {0:?}")]
    UnknownAction(String),

    #[error("arguments of action {action:?} violate its schema: {reason}")]
    ArgumentSchema { action: String, reason: String },

    #[error("thinking block is not terminated")]
    UnterminatedThink,

    #[error("think tags nested inside a thinking block")]
    NestedThink,

    #[error("expected exactly one corrected_think block, found {0}")]
    CorrectedThinkCount(usize),

    #[error("corrected_think block is not terminated")]
    UnterminatedCorrectedThink,

    #[error("expected a single-word \"Yes\" or \"No\", got {0:?}")]
    InvalidJudgement(String),
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MissingSection(_) => "missing_section",
            Self::DuplicateSection(_) => "duplicate_section",
            Self::EmptySection(_) => "empty_section",
            Self::Preamble(_) => "preamble",
            Self::TrailingText(_) => "trailing_text",
            Self::InvalidVerdict(_) => "invalid_verdict",
            Self::UnexpectedExplanation => "unexpected_explanation",
            Self::MissingExplanation => "missing_explanation",
            Self::MalformedAction(_) => "malformed_action",
            Self::MalformedArguments { .. } => "malformed_arguments",
            Self::UnknownAction(_) => "unknown_action",
            Self::ArgumentSchema { .. } => "argument_schema",
            Self::UnterminatedThink => "unterminated_think",
            Self::NestedThink => "nested_think",
            Self::CorrectedThinkCount(_) => "corrected_think_count",
            Self::UnterminatedCorrectedThink => "unterminated_corrected_think",
            Self::InvalidJudgement(_) => "invalid_judgement",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Every attempt returned text that failed to parse; `raw` is the last reply.
    #[error("{behavior} reply failed to parse after {attempts} attempt(s): {error}")]
    Parse {
        behavior: Behavior,
        attempts: u32,
        error: ParseError,
        raw: String,
    },

    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("no recorded response for request {0}")]
    ReplayMiss(String),

    #[error("prompt needs about {tokens} tokens, over the budget of {budget}")]
    ContextTooLong { tokens: usize, budget: usize },

    #[error("invalid chat context: {0}")]
    InvalidContext(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("environment variable {0} holding the auth token is not set")]
    MissingToken(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Transport failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Http { status, .. } => *status == 429 || *status >= 500,
            Self::Transport(_) => true,
            _ => false,
        }
    }

    /// Stable code for logs and fixtures.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Parse { error, .. } => error.code(),
            Self::Http { .. } => "http",
            Self::Transport(_) => "transport",
            Self::ReplayMiss(_) => "replay_miss",
            Self::ContextTooLong { .. } => "context_too_long",
            Self::InvalidContext(_) => "invalid_context",
            Self::Config(_) => "config",
            Self::MissingToken(_) => "missing_token",
            Self::Json(_) => "json",
            Self::Io(_) => "io",
        }
    }
}
