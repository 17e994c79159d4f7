//! Symbolic tier of the natural-language actor-critic.
//!
//! "Language" is modelled here as canonical rollout descriptions over finite
//! MDPs, which makes every piece of the policy-evaluation and
//! policy-improvement machinery checkable against exact dynamic-programming
//! oracles.
//!
//! - [`mdp`]: tabular MDPs with linear-reward features and the DP oracles.
//! - [`lang`]: rollout descriptions, the description combinator, the language
//!   Bellman backup, successor-model fitting, the evaluator and critics.
//! - [`engine`]: prioritized replay, EMA targets, the two losses, refinement,
//!   distillation and the full actor-critic loop.

pub mod engine;
pub mod error;
pub mod lang;
pub mod mdp;
pub mod rng;

pub use error::{Error, Result};
