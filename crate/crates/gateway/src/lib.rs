//! Prompt orchestration for the language actor-critic against an
//! OpenAI-compatible chat-completions endpoint.
//!
//! Each component (policy, critic, Bellman target, refinement, thinking
//! correction) is a prompt over the interaction history. Replies are parsed
//! strictly: they either produce a typed value or a [`ParseError`] with a
//! stable code. [`ReplayTransport`] and [`ScriptedTransport`] make the whole
//! tier testable offline.

pub mod config;
pub mod context;
pub mod error;
pub mod gateway;
pub mod golden;
pub mod parse;
pub mod schema;
pub mod templates;
pub mod transport;

pub use config::{Behavior, BehaviorOverride, EndpointConfig, RetryPolicy, Site};
pub use context::{ChatContext, Message, Role};
pub use error::{Error, ParseError, Result};
pub use gateway::{BellmanTarget, CorrectionKind, Gateway, Generated, NextObservation, RefinedAction};
pub use parse::{ComposedAction, CorrectedThought, Correctness, EnvAction, Optimality, ParsedEvaluation};
pub use schema::{ActionSchema, ActionSpec, ParamKind, ParamSpec};
pub use transport::{
    ChatRequest, ChatResponse, Exchange, HttpTransport, RecordingTransport, ReplayTransport, ScriptedTransport,
    Transport,
};
