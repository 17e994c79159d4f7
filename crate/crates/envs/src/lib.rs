//! Episodic text environments with 0/1 terminal rewards.
//!
//! - [`twenty_q`]: 20 Questions against a scripted attribute-table oracle.
//! - [`tool_use`]: a retail customer-service world with tools, a scripted
//!   customer and guideline rules.
//! - [`math`]: single-step `\boxed{}` answer checking.
//!
//! [`env_reset`] and [`env_step`] drive any of them; [`run_episode`] plays a
//! whole episode with an [`Agent`].

pub mod agents;
mod env;
pub mod error;
pub mod math;
mod rollout;
pub mod tool_use;
pub mod twenty_q;

pub use agents::{Agent, AgentView, BisectionAgent, GatewayAgent, RandomGuesser, ReplayAgent};
pub use env::{env_reset, env_reset_with_judge, env_step, EnvSpec, EnvState, Episode, TranscriptEntry};
pub use error::{Error, Result};
pub use rollout::{run_episode, EpisodeLog, StepLog};
pub use twenty_q::{judge_guess, Judge, ObjectTable};
