use nlac_envs::EpisodeLog;
use nlac_gateway::{ComposedAction, Message};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRANSITION_SCHEMA_VERSION: u32 = 1;
pub const PAIR_SCHEMA_VERSION: u32 = 1;

/// One `(s_t, a_t, r_t, o_{t+1})` step of the replay log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub schema_version: u32,
    pub episode_id: u64,
    pub step_index: u32,
    /// Chat messages of `s_t`, ending with the latest observation.
    pub context: Vec<Message>,
    pub action: ComposedAction,
    pub reward: f64,
    pub next_observation: String,
    pub done: bool,
    /// Sampling priority: the last critic loss reported for this transition.
    pub priority: f64,
}

impl TransitionRecord {
    pub fn key(&self) -> (u64, u32) {
        (self.episode_id, self.step_index)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != TRANSITION_SCHEMA_VERSION {
            return Err(Error::Invalid(format!("schema_version {} is not {TRANSITION_SCHEMA_VERSION}", self.schema_version)));
        }
        if !(self.priority >= 0.0 && self.priority.is_finite()) {
            return Err(Error::Invalid(format!("priority {} must be finite and ≥ 0", self.priority)));
        }
        if !self.reward.is_finite() {
            return Err(Error::Invalid("reward must be finite".into()));
        }
        match self.context.last() {
            Some(m) if m.role == nlac_gateway::Role::User => Ok(()),
            _ => Err(Error::Invalid("context must end with an observation".into())),
        }
    }

    /// Transitions of a logged episode, all with the same initial priority.
    pub fn from_episode(log: &EpisodeLog, priority: f64) -> Vec<Self> {
        log.steps
            .iter()
            .map(|s| Self {
                schema_version: TRANSITION_SCHEMA_VERSION,
                episode_id: log.episode_id,
                step_index: s.step_index,
                context: s.context.clone(),
                action: s.action.clone(),
                reward: s.reward,
                next_observation: s.next_observation.clone(),
                done: s.done,
                priority,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairKind {
    /// Critic prompt at `(s_t, a_t)` → corrected Bellman-target evaluation.
    #[serde(rename = "critic_L1")]
    CriticL1,
    /// Policy prompt at `s_t` → corrected refined action.
    #[serde(rename = "policy_L2")]
    PolicyL2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub episode_id: u64,
    pub step_index: u32,
    /// Refinement round that produced an L2 target (0 for the first); 0 for L1.
    pub attempt: u32,
    /// The target's thinking was rewritten by the correction prompt.
    pub correction_applied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingPair {
    pub schema_version: u32,
    pub kind: PairKind,
    pub context: Vec<Message>,
    pub target_text: String,
    pub provenance: Provenance,
}

impl TrainingPair {
    /// Re-parses the target with the parser for its kind.
    pub fn check_target(&self) -> Result<(), nlac_gateway::ParseError> {
        match self.kind {
            PairKind::CriticL1 => nlac_gateway::ParsedEvaluation::parse_target(&self.target_text).map(drop),
            PairKind::PolicyL2 => nlac_gateway::parse::parse_action_target(&self.target_text).map(drop),
        }
    }
}
