//! Replay, target averaging, the two losses, refinement, distillation and the
//! actor-critic loop.

mod ema;
mod loss;
mod nlac;
mod policy;
mod refine;
mod replay;

pub use ema::{ema_blend, ema_update, EmaState, DEFAULT_TARGET_TAU};
pub use loss::{compute_l1, compute_l2, l2_from_logits, l2_logit_gradient, softmax, L2Value, L2_CAP};
pub use nlac::{
    run_nlac, run_nlac_from, CriticMode, DistillMode, IterationDiagnostics, NlacConfig,
    NlacOutcome, RefinementScope,
};
pub use policy::{distill, distill_weighted, project, SoftmaxPolicy};
pub use refine::{refine, Attempt, RefinementTranscript};
pub use replay::{ReplayBuffer, DEFAULT_PRIORITY_ALPHA};
