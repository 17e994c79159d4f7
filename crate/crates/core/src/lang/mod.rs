//! Rollout descriptions and the policy-evaluation machinery built on them.

mod backup;
mod critic;
mod description;
mod distribution;
mod evaluator;
mod fit;
pub mod representation;

pub use backup::{language_bellman_backup, BackupMode, EmpiricalKernel, TransitionKernel};
pub use critic::{Critic, DescriptionCritic, SuccessorCritic};
pub use description::{Combinator, RolloutDescription, Step};
pub use distribution::{
    DescriptionDistribution, DescriptionTable, WeightedDescription, DEFAULT_SUPPORT_CAP,
    DESCRIPTION_SCHEMA_VERSION,
};
pub use evaluator::{scalarize_g, Critique, Evaluator, DEFAULT_OPTIMALITY_MARGIN};
pub use fit::{fit_successor_model, fit_successor_model_on_kernel, FitConfig, FitMode, FittedModel};
