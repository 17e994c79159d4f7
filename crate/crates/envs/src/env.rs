use std::sync::Arc;

use nlac_gateway::{ActionSchema, EnvAction};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::tool_use::{self, Scenario, ToolUseWorld, POLICY};
use crate::twenty_q::{self, Judge, ObjectTable, TwentyQWorld, DEFAULT_MAX_TURNS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub observation: String,
    pub turn: u32,
    pub done: bool,
    /// 0 until the episode ends.
    pub reward: f64,
    /// A guideline rule was broken (tool-use only).
    pub violation: bool,
}

fn twenty() -> u32 {
    DEFAULT_MAX_TURNS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    TwentyQuestions {
        /// Drawn uniformly from the table under the reset seed when absent.
        #[serde(default)]
        hidden: Option<String>,
        #[serde(default = "twenty")]
        max_turns: u32,
    },
    ToolUse {
        /// Bundled scenario id, or a path to a scenario file.
        scenario: String,
    },
    Math {
        problem: String,
        gold: String,
    },
}

#[derive(Debug, Clone)]
enum World {
    TwentyQ(TwentyQWorld),
    ToolUse(Box<ToolUseWorld>),
    Math { gold: String },
}

/// One step of an episode, for export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub action: EnvAction,
    pub state: EnvState,
}

/// A running environment instance.
#[derive(Debug, Clone)]
pub struct Episode {
    world: World,
    task: String,
    first_observation: String,
    schema: ActionSchema,
    horizon: u32,
    state: EnvState,
    transcript: Vec<TranscriptEntry>,
}

/// Resets with the scripted 20 Questions judge.
pub fn env_reset(spec: &EnvSpec, seed: u64) -> Result<Episode> {
    env_reset_with_judge(spec, seed, Judge::Scripted)
}

pub fn env_reset_with_judge(spec: &EnvSpec, seed: u64, judge: Judge) -> Result<Episode> {
    let (world, task, first, schema, horizon) = match spec {
        EnvSpec::TwentyQuestions { hidden, max_turns } => {
            let table = Arc::new(ObjectTable::bundled());
            let hidden = match hidden {
                Some(h) => h.clone(),
                None => {
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                    let i = rng.random_range(0..table.len());
                    table.objects().nth(i).expect("index in range").to_string()
                }
            };
            let world = TwentyQWorld::new(table, &hidden, *max_turns, judge)?;
            let task = twenty_q::TASK.to_string();
            (World::TwentyQ(world), task, twenty_q::FIRST_OBSERVATION.to_string(), twenty_q::action_schema(), *max_turns)
        }
        EnvSpec::ToolUse { scenario } => {
            let s = if scenario.ends_with(".json") {
                Scenario::from_path(std::path::Path::new(scenario))?
            } else {
                Scenario::bundled(scenario)?
            };
            let first = s.first_message.clone();
            let horizon = s.max_turns;
            let world = ToolUseWorld::new(s)?;
            (World::ToolUse(Box::new(world)), POLICY.trim_end().to_string(), first, tool_use::action_schema(), horizon)
        }
        EnvSpec::Math { problem, gold } => {
            let task = "Solve the problem. Submit a worked solution with the answer command, putting the final answer in \\boxed{}.";
            (World::Math { gold: gold.clone() }, task.to_string(), problem.clone(), math::action_schema(), 1)
        }
    };
    let state = EnvState {
        observation: format!("{task}\n\n{first}"),
        turn: 0,
        done: false,
        reward: 0.0,
        violation: false,
    };
    Ok(Episode { world, task, first_observation: first, schema, horizon, state, transcript: Vec::new() })
}

/// Advances an episode by one action.
pub fn env_step(episode: &mut Episode, action: &EnvAction) -> Result<EnvState> {
    episode.step(action).cloned()
}

impl Episode {
    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// The task description `q`.
    pub fn task(&self) -> &str {
        &self.task
    }

    /// The first observation `o_0`.
    pub fn first_observation(&self) -> &str {
        &self.first_observation
    }

    pub fn schema(&self) -> &ActionSchema {
        &self.schema
    }

    /// Maximum number of actions.
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn twenty_q(&self) -> Option<&TwentyQWorld> {
        match &self.world {
            World::TwentyQ(w) => Some(w),
            _ => None,
        }
    }

    pub fn tool_use(&self) -> Option<&ToolUseWorld> {
        match &self.world {
            World::ToolUse(w) => Some(w),
            _ => None,
        }
    }

    pub fn step(&mut self, action: &EnvAction) -> Result<&EnvState> {
        if self.state.done {
            return Err(Error::EpisodeDone);
        }
        let turn = self.state.turn + 1;
        let out_of_turns = turn >= self.horizon;
        let (observation, done, reward, violation) = match &mut self.world {
            World::TwentyQ(w) => {
                let r = w.respond(action, turn)?;
                let mut obs = r.observation;
                if !r.solved && out_of_turns {
                    obs = format!("{obs} You are out of turns. The object was {}.", w.hidden());
                }
                (obs, r.solved || out_of_turns, if r.solved { 1.0 } else { 0.0 }, false)
            }
            World::ToolUse(w) => {
                let r = w.step(action);
                let done = r.done || out_of_turns;
                (r.observation, done, if done { w.reward() } else { 0.0 }, w.violated())
            }
            World::Math { gold } => {
                let solution = match (action.name.as_str(), action.arguments.get("solution").and_then(|v| v.as_str())) {
                    ("answer", Some(s)) => s,
                    _ => "",
                };
                let reward = math::score(solution, gold);
                let obs = if reward == 1.0 { "Correct." } else { "Incorrect." };
                (obs.to_string(), true, reward, false)
            }
        };
        self.state = EnvState { observation, turn, done, reward, violation };
        self.transcript.push(TranscriptEntry { action: action.clone(), state: self.state.clone() });
        Ok(&self.state)
    }
}
