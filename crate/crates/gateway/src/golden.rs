//! Golden fixtures: scripted replies pushed through a gateway operation,
//! with the expected typed result or error code.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{EndpointConfig, RetryPolicy, Site};
use crate::context::{ChatContext, Message};
use crate::error::{Error, Result};
use crate::gateway::{CorrectionKind, Gateway, NextObservation};
use crate::parse::{parse_composed_action, parse_evaluation};
use crate::schema::ActionSchema;
use crate::transport::{ChatResponse, ScriptedTransport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureCorrection {
    Critique,
    Refinement,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixtureOp {
    Action {
        context: Vec<Message>,
        schema: ActionSchema,
    },
    Critique {
        context: Vec<Message>,
        action: String,
        k: u32,
    },
    BellmanTarget {
        context: Vec<Message>,
        action: String,
        next: NextObservation,
    },
    Correct {
        prompt: Vec<Message>,
        thinking: String,
        body: String,
        correction: FixtureCorrection,
    },
    Refine {
        context: Vec<Message>,
        /// (action text, evaluation text) pairs.
        transcript: Vec<(String, String)>,
        schema: ActionSchema,
    },
    Judge {
        guess: String,
        hidden: String,
    },
    Correctness {
        context: Vec<Message>,
        solution: String,
    },
}

/// The last message of request `call` must contain `text`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptCheck {
    pub call: usize,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    pub op: FixtureOp,
    pub replies: Vec<ChatResponse>,
    #[serde(default = "one")]
    pub max_attempts: u32,
    /// Expected result, serialized.
    #[serde(default)]
    pub expect: Option<Value>,
    /// Expected error code.
    #[serde(default)]
    pub error: Option<String>,
    /// Expected number of endpoint calls.
    pub calls: usize,
    #[serde(default)]
    pub prompt_contains: Vec<PromptCheck>,
}

fn one() -> u32 {
    1
}

pub fn load_dir(dir: &Path) -> Result<Vec<Fixture>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths
        .iter()
        .map(|p| Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?))
        .collect()
}

fn context(messages: &[Message]) -> Result<ChatContext> {
    ChatContext::from_messages(messages.to_vec(), crate::config::DEFAULT_MAX_PROMPT_TOKENS)
}

fn parse_input<T>(what: &str, r: std::result::Result<T, crate::error::ParseError>) -> Result<T> {
    r.map_err(|e| Error::Config(format!("fixture {what} does not parse: {e}")))
}

fn execute(gateway: &Gateway, op: &FixtureOp) -> Result<Value> {
    let site = Site::default();
    let value = match op {
        FixtureOp::Action { context: c, schema } => serde_json::to_value(gateway.generate_action(&context(c)?, schema, site)?)?,
        FixtureOp::Critique { context: c, action, k } => {
            let action = parse_input("action", parse_composed_action(action))?;
            let critiques = gateway.generate_critique(&context(c)?, &action, *k, site)?;
            serde_json::to_value(critiques)?
        }
        FixtureOp::BellmanTarget { context: c, action, next } => {
            let action = parse_input("action", parse_composed_action(action))?;
            let target = gateway.generate_bellman_target(&context(c)?, &action, next, site)?;
            let mut v = serde_json::to_value(&target)?;
            v["target_text"] = Value::String(target.target_text());
            v
        }
        FixtureOp::Correct { prompt, thinking, body, correction } => {
            let kind = match correction {
                FixtureCorrection::Critique => CorrectionKind::Critique,
                FixtureCorrection::Refinement => CorrectionKind::Refinement,
            };
            serde_json::to_value(gateway.correct_chain_of_thought(prompt, thinking, body, kind, site)?)?
        }
        FixtureOp::Refine { context: c, transcript, schema } => {
            let pairs = transcript
                .iter()
                .map(|(a, e)| Ok((parse_input("action", parse_composed_action(a))?, parse_input("evaluation", parse_evaluation(e))?)))
                .collect::<Result<Vec<_>>>()?;
            let refined = gateway.generate_refined_action(&context(c)?, &pairs, schema, site)?;
            let mut v = serde_json::to_value(&refined)?;
            v["target_text"] = Value::String(refined.target_text());
            v
        }
        FixtureOp::Judge { guess, hidden } => Value::Bool(gateway.judge(guess, hidden, site)?),
        FixtureOp::Correctness { context: c, solution } => {
            serde_json::to_value(gateway.evaluate_solution(&context(c)?, solution, site)?)?
        }
    };
    Ok(value)
}

/// Runs one fixture. `Err` carries a description of the first mismatch.
pub fn check(fixture: &Fixture) -> std::result::Result<(), String> {
    let transport = Arc::new(ScriptedTransport::new(fixture.replies.iter().cloned()));
    let config = EndpointConfig {
        model_name: "fixture-model".into(),
        retry_policy: RetryPolicy::immediate(fixture.max_attempts),
        ..EndpointConfig::default()
    };
    let gateway = Gateway::new(transport.clone(), config, 0).map_err(|e| e.to_string())?;
    let outcome = execute(&gateway, &fixture.op);
    match (&fixture.expect, &fixture.error, outcome) {
        (Some(want), None, Ok(got)) if &got == want => {}
        (Some(want), None, Ok(got)) => return Err(format!("result mismatch\n want {want}\n  got {got}")),
        (None, Some(code), Err(e)) if e.code() == code => {}
        (_, _, Err(e)) => return Err(format!("unexpected error [{}]: {e}", e.code())),
        (None, Some(code), Ok(got)) => return Err(format!("expected error {code}, got {got}")),
        _ => return Err("fixture must set exactly one of expect and error".into()),
    }
    let requests = transport.requests();
    if requests.len() != fixture.calls {
        return Err(format!("expected {} endpoint calls, saw {}", fixture.calls, requests.len()));
    }
    for check in &fixture.prompt_contains {
        let last = requests
            .get(check.call)
            .and_then(|r| r.messages.last())
            .ok_or_else(|| format!("no request {}", check.call))?;
        if !last.content.contains(&check.text) {
            return Err(format!("request {} prompt lacks {:?}", check.call, check.text));
        }
    }
    Ok(())
}
