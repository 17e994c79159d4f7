//! Persistence of rollout transitions and emission of supervision pairs.
//!
//! Both streams are line-delimited JSON with an explicit `schema_version` on
//! every line.
//!
//! Transition log line (`TransitionRecord`):
//!
//! | field | type | meaning |
//! |---|---|---|
//! | `schema_version` | integer | currently 1 |
//! | `episode_id` | integer | unique with `step_index` |
//! | `step_index` | integer | `t`, from 0 |
//! | `context` | `[{role, content}]` | chat messages of `s_t` |
//! | `action` | `{thought, env_action: {name, arguments}}` | `a_t` |
//! | `reward` | number | `r_t` |
//! | `next_observation` | string | `o_{t+1}` |
//! | `done` | bool | episode ended after this step |
//! | `priority` | number ≥ 0 | last reported critic loss |
//!
//! Training pair line (`TrainingPair`):
//!
//! | field | type | meaning |
//! |---|---|---|
//! | `schema_version` | integer | currently 1 |
//! | `kind` | `"critic_L1"` or `"policy_L2"` | which loss the pair supervises |
//! | `context` | `[{role, content}]` | full prompt |
//! | `target_text` | string | completion to train on |
//! | `provenance` | `{episode_id, step_index, attempt, correction_applied}` | source transition |

mod emit;
pub mod error;
mod record;
mod store;

pub use emit::{critic_pair, emit_training_pairs, policy_pair, EmitConfig, Emission, Skip};
pub use error::{Error, Result};
pub use record::{PairKind, Provenance, TrainingPair, TransitionRecord, PAIR_SCHEMA_VERSION, TRANSITION_SCHEMA_VERSION};
pub use store::{
    apply_priorities, load_buffer, load_pairs, load_priority_updates, load_transitions, to_jsonl, write_jsonl, Loaded,
    PriorityUpdate, TransitionLog,
};
