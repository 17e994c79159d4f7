use nlac_gateway::templates::render_react_system;
use nlac_gateway::{ChatContext, ComposedAction, Message, Site};
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentView};
use crate::env::{env_reset_with_judge, EnvSpec, EnvState};
use crate::error::Result;
use crate::twenty_q::Judge;

/// One transition `(s_t, a_t, r_t, o_{t+1})` of a logged episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step_index: u32,
    /// Messages of `s_t`.
    pub context: Vec<Message>,
    pub action: ComposedAction,
    pub reward: f64,
    pub next_observation: String,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode_id: u64,
    pub seed: u64,
    pub spec: EnvSpec,
    pub steps: Vec<StepLog>,
    pub reward: f64,
    pub violation: bool,
}

impl EpisodeLog {
    pub fn won(&self) -> bool {
        self.reward == 1.0
    }
}

/// Plays one episode to termination or the environment's horizon.
pub fn run_episode(
    spec: &EnvSpec,
    seed: u64,
    episode_id: u64,
    agent: &mut dyn Agent,
    judge: Judge,
    max_prompt_tokens: usize,
) -> Result<EpisodeLog> {
    let mut episode = env_reset_with_judge(spec, seed, judge)?;
    let system = render_react_system(episode.task(), &episode.schema().describe());
    let mut ctx = ChatContext::new(system, episode.first_observation()).with_budget(max_prompt_tokens);
    let mut state: EnvState = episode.state().clone();
    let mut steps = Vec::new();
    while !state.done {
        let action = {
            let view = AgentView {
                context: &ctx,
                state: &state,
                schema: episode.schema(),
                site: Site::new(episode_id, state.turn as u64),
            };
            agent.act(&view)?
        };
        let next = episode.step(&action.env_action)?.clone();
        steps.push(StepLog {
            step_index: state.turn,
            context: ctx.messages().to_vec(),
            action: action.clone(),
            reward: next.reward,
            next_observation: next.observation.clone(),
            done: next.done,
        });
        ctx.push_turn(action.render(), next.observation.clone());
        state = next;
    }
    Ok(EpisodeLog {
        episode_id,
        seed,
        spec: spec.clone(),
        steps,
        reward: state.reward,
        violation: state.violation,
    })
}
