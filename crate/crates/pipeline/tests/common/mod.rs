#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use nlac_core::engine::ReplayBuffer;
use nlac_envs::{run_episode, BisectionAgent, EnvSpec, Judge, ObjectTable};
use nlac_gateway::templates::Template;
use nlac_gateway::{ChatRequest, ChatResponse, EndpointConfig, Gateway, Transport};
use nlac_pipeline::{EmitConfig, TransitionRecord};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub const BOOTSTRAP_HEAD: &str = "The response to your latest action is";

/// Deterministic endpoint stand-in: answers by which prompt is last and
/// varies thinking and verdicts with the request seed.
#[derive(Default)]
pub struct RuleStub {
    /// Target evaluations for transitions whose bootstrap prompt contains
    /// this text come back unparseable.
    pub fail_target_on: Option<String>,
}

impl Transport for RuleStub {
    fn complete(&self, req: &ChatRequest) -> nlac_gateway::Result<ChatResponse> {
        let last = req.messages.last().map(|m| m.content.as_str()).unwrap_or_default();
        let seed = req.seed.unwrap_or(0);
        let think = seed.is_multiple_of(2);
        let text = if last == Template::CriticEval.text() {
            if seed.is_multiple_of(3) {
                "Future:\nThe answer rules out about half of the objects and I guess it a few turns later.\nOptimality:\nYes.".to_string()
            } else {
                "Future:\nThe answer rules out very few objects and I run out of turns.\nOptimality:\nNo. A question about the object's category would split the remaining objects more evenly.".to_string()
            }
        } else if last.starts_with(BOOTSTRAP_HEAD) {
            "I ask about its category next, narrow it to furniture, and guess correctly within five turns.".to_string()
        } else if last == Template::TargetEval.text() {
            let bootstrap = &req.messages[req.messages.len() - 3].content;
            if self.fail_target_on.as_deref().is_some_and(|f| bootstrap.contains(f)) {
                "The action seems fine to me.".to_string()
            } else if think {
                "<think>\nThe hidden object is a couch, so this question is wasted.\n</think>\n\nFuture:\nThe oracle answered and I keep narrowing down, guessing within a few turns.\nOptimality:\nNo. Asking about the category first would remove more candidates.".to_string()
            } else {
                "Future:\nThe oracle answered and I keep narrowing down, guessing within a few turns.\nOptimality:\nYes.".to_string()
            }
        } else if last == Template::CorrectCritiqueThink.text() || last == Template::CorrectRefineThink.text() {
            "<corrected_think>\nOnly the answers so far are known. A broad category question removes the most candidates.\n</corrected_think>".to_string()
        } else if last == Template::Refine.text() {
            let body = "Thought:\nA broad category question removes the most candidates.\nAction:\n{\"name\": \"ask\", \"arguments\": {\"question\": \"Is it furniture?\"}}";
            if think {
                format!("<think>\nThe couch is furniture.\n</think>\n\n{body}")
            } else {
                body.to_string()
            }
        } else {
            "Thought:\nStart with living things.\nAction:\n{\"name\": \"ask\", \"arguments\": {\"question\": \"Is it an animal?\"}}".to_string()
        };
        Ok(ChatResponse::text(text))
    }
}

pub fn gateway(transport: impl Transport + 'static) -> Gateway {
    Gateway::new(Arc::new(transport), EndpointConfig::default(), 5).unwrap()
}

/// Transitions of a bisection episode on "couch", priority `0.5·t`.
pub fn fixture_transitions() -> Vec<TransitionRecord> {
    let table = Arc::new(ObjectTable::bundled());
    let spec = EnvSpec::TwentyQuestions { hidden: Some("couch".into()), max_turns: 20 };
    let log = run_episode(&spec, 0, 1, &mut BisectionAgent::new(table), Judge::Scripted, usize::MAX).unwrap();
    let mut records = TransitionRecord::from_episode(&log, 0.0);
    for r in &mut records {
        r.priority = 0.5 * r.step_index as f64;
    }
    records
}

pub fn buffer(records: &[TransitionRecord], alpha: f64) -> ReplayBuffer<TransitionRecord> {
    let mut b = ReplayBuffer::new(records.len().max(1), alpha).unwrap();
    for r in records {
        b.push(r.clone(), r.priority).unwrap();
    }
    b
}

/// Settings of the golden emission run.
pub fn golden_config() -> EmitConfig {
    EmitConfig { seed: 11, batch_size: 6, l2_ratio: 0.5, k: 1, m: 2, workers: 4, max_failure_rate: 0.0 }
}

pub const GOLDEN_ALPHA: f64 = 1.0;
