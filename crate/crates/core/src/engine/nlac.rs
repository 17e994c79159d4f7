use serde::{Deserialize, Serialize};

use super::ema::DEFAULT_TARGET_TAU;
use super::loss::compute_l2;
use super::policy::{distill_weighted, project};
use super::refine::refine;
use super::replay::{ReplayBuffer, DEFAULT_PRIORITY_ALPHA};
use crate::lang::representation::{
    blend_target, td_successor_features_warm, td_update, TdConfig, TdMode,
};
use crate::lang::{
    fit_successor_model_on_kernel, Critic, DescriptionCritic, Evaluator, FitConfig,
    SuccessorCritic,
};
use crate::mdp::{
    expected_return, sample_initial, sample_transition, SuccessorTable, TabularMdp,
    TabularPolicy, Transition, DEFAULT_DP_TOL,
};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticMode {
    /// Successor representation trained to convergence by expected TD on
    /// the true kernel.
    Exact,
    /// Successor representation trained by sampled TD on prioritized replay.
    Sampled,
    /// Language successor model fitted exactly on the true kernel, critiqued
    /// through `k` sampled descriptions.
    Description,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementScope {
    /// Every non-terminal state, every action in the policy's support.
    Exhaustive,
    /// States of the replay batch, with one sampled initial action each.
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillMode {
    /// Closed-form minimizer of the distillation loss.
    Projection,
    /// `distill_steps` gradient steps of size `lambda2`.
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlacConfig {
    pub iterations: usize,
    pub env_steps_per_iteration: usize,
    pub batch_size: usize,
    pub critic_updates_per_iteration: usize,
    /// Critic step size.
    pub lambda1: f64,
    /// Policy step size.
    pub lambda2: f64,
    pub distill_steps: usize,
    pub tau: f64,
    pub alpha: f64,
    pub horizon: usize,
    pub k: usize,
    pub m: usize,
    /// Candidates scored per refinement round; `None` scores every action.
    pub candidate_budget: Option<usize>,
    pub critic: CriticMode,
    pub refinement: RefinementScope,
    pub distill: DistillMode,
    pub buffer_capacity: usize,
    /// Sup-norm accuracy the exact critic is trained to.
    pub critic_tol: f64,
    /// EMA rate of the exact critic's bootstrap target.
    pub exact_target_tau: f64,
    pub seed: u64,
}

impl Default for NlacConfig {
    fn default() -> Self {
        Self {
            iterations: 30,
            env_steps_per_iteration: 256,
            batch_size: 1024,
            critic_updates_per_iteration: 20,
            lambda1: 0.5,
            lambda2: 1.0,
            distill_steps: 100,
            tau: DEFAULT_TARGET_TAU,
            alpha: DEFAULT_PRIORITY_ALPHA,
            horizon: 4,
            k: 1,
            m: 1,
            candidate_budget: None,
            critic: CriticMode::Exact,
            refinement: RefinementScope::Exhaustive,
            distill: DistillMode::Projection,
            buffer_capacity: 100_000,
            critic_tol: 1e-9,
            exact_target_tau: 0.5,
            seed: 0,
        }
    }
}

impl NlacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.candidate_budget == Some(0) {
            return bad("candidate budget must be at least 1");
        }
        if !(self.lambda1 > 0.0 && self.lambda1 <= 1.0) {
            return bad("lambda1 must lie in (0, 1]");
        }
        if !(self.lambda2 > 0.0 && self.lambda2.is_finite()) {
            return bad("lambda2 must be positive");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) || !(self.exact_target_tau > 0.0 && self.exact_target_tau <= 1.0) {
            return bad("EMA rates must lie in (0, 1]");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and nonnegative");
        }
        if !(self.critic_tol > 0.0) {
            return bad("critic tolerance must be positive");
        }
        if self.buffer_capacity == 0 {
            return bad("buffer capacity must be positive");
        }
        if self.critic == CriticMode::Sampled
            && (self.batch_size == 0 || self.env_steps_per_iteration == 0)
        {
            return bad("sampled critic needs a positive batch size and environment steps");
        }
        if self.refinement == RefinementScope::Batch && (self.batch_size == 0 || self.env_steps_per_iteration == 0) {
            return bad("batch refinement needs a positive batch size and environment steps");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// `J` of the policy the iteration started from.
    pub return_before: f64,
    /// `J` of the distilled policy.
    pub expected_return: f64,
    /// Mean critic loss: the final Bellman residual for trained-to-convergence
    /// critics, the mean TD-error L1 norm for the sampled critic.
    pub mean_l1: f64,
    /// Mean `−log π(a^r|s)` of refined actions under the pre-update policy.
    pub mean_l2: f64,
    pub capped_l2: usize,
    pub critic_steps: usize,
    pub refinements: usize,
    pub changed_states: usize,
    pub transcripts_monotone: bool,
}

#[derive(Debug, Clone)]
pub struct NlacOutcome {
    pub policy: TabularPolicy,
    pub diagnostics: Vec<IterationDiagnostics>,
}

pub fn run_nlac(mdp: &TabularMdp, config: &NlacConfig) -> Result<NlacOutcome> {
    let initial = TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    run_nlac_from(mdp, config, initial)
}

pub fn run_nlac_from(
    mdp: &TabularMdp,
    config: &NlacConfig,
    initial: TabularPolicy,
) -> Result<NlacOutcome> {
    config.validate()?;
    initial.check_against(mdp)?;
    let (ns, na, dim) = (mdp.num_states(), mdp.num_actions(), mdp.feature_dim());
    let budget = config.candidate_budget.unwrap_or(na);
    let mut policy = initial;
    let mut rng = seeded(config.seed);
    let mut buffer: ReplayBuffer<Transition> = ReplayBuffer::new(config.buffer_capacity, config.alpha)?;
    let mut table = SuccessorTable::zeros(ns, na, dim);
    let mut target = table.clone();
    let mut state = sample_initial(mdp, &mut rng);
    let mut diagnostics = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let return_before = expected_return(mdp, &policy, DEFAULT_DP_TOL)?;

        for _ in 0..config.env_steps_per_iteration {
            let t = sample_transition(mdp, &policy, state, &mut rng)?;
            state = if t.done { sample_initial(mdp, &mut rng) } else { t.next_state };
            let priority = buffer.max_priority().max(1.0);
            buffer.push(t, priority)?;
        }

        let mut batch_states = Vec::new();
        let (mean_l1, critic_steps) = match config.critic {
            CriticMode::Exact | CriticMode::Description => {
                warm_exact_critic(mdp, &policy, config, &mut table, &mut target)?
            }
            CriticMode::Sampled => {
                let mut l1_total = 0.0;
                let mut updates = 0;
                for _ in 0..config.critic_updates_per_iteration {
                    let indices = buffer.sample_indices(config.batch_size, &mut rng)?;
                    for &i in &indices {
                        let t = *buffer.get(i).expect("sampled index in range");
                        let next_action = policy.sample_action(t.next_state, &mut rng);
                        let l1 = td_update(mdp, &mut table, &target, &t, next_action, config.lambda1);
                        buffer.set_priority(i, l1)?;
                        l1_total += l1;
                        updates += 1;
                    }
                    blend_target(&mut target, &table, config.tau);
                    batch_states.extend(indices.iter().map(|&i| buffer.get(i).expect("in range").state));
                }
                (l1_total / updates.max(1) as f64, updates)
            }
        };
        if config.refinement == RefinementScope::Batch && batch_states.is_empty() {
            let indices = buffer.sample_indices(config.batch_size, &mut rng)?;
            batch_states = indices.iter().map(|&i| buffer.get(i).expect("in range").state).collect();
        }

        let model;
        let successor_critic;
        let description_critic;
        let critic: &dyn Critic = match config.critic {
            CriticMode::Description => {
                let pairs: Vec<(usize, usize)> =
                    (0..ns).flat_map(|s| (0..na).map(move |a| (s, a))).collect();
                let fit = FitConfig::exact(config.horizon);
                model = fit_successor_model_on_kernel(mdp, mdp, &pairs, &policy, &fit)?.0;
                description_critic = DescriptionCritic::sampled(
                    Evaluator::new(&model),
                    config.k,
                    derive_seed(config.seed, iteration as u64),
                )?;
                &description_critic
            }
            _ => {
                successor_critic = SuccessorCritic::new(mdp, &policy, &table);
                &successor_critic
            }
        };

        let mut pairs = Vec::new();
        let mut monotone = true;
        match config.refinement {
            RefinementScope::Exhaustive => {
                for s in (0..ns).filter(|&s| !mdp.is_terminal(s)) {
                    for (a, &p) in policy.row(s).iter().enumerate() {
                        if p > 0.0 {
                            let t = refine(critic, s, a, config.m, budget)?;
                            monotone &= t.is_monotone();
                            pairs.push((s, t.refined_action(), p));
                        }
                    }
                }
            }
            RefinementScope::Batch => {
                for &s in batch_states.iter().filter(|&&s| !mdp.is_terminal(s)) {
                    let a = policy.sample_action(s, &mut rng);
                    let t = refine(critic, s, a, config.m, budget)?;
                    monotone &= t.is_monotone();
                    pairs.push((s, t.refined_action(), 1.0));
                }
            }
        }

        let mut l2_total = 0.0;
        let mut weight_total = 0.0;
        let mut capped_l2 = 0;
        for &(s, a, w) in &pairs {
            let l2 = compute_l2(&policy, s, a)?;
            l2_total += w * l2.loss;
            weight_total += w;
            capped_l2 += usize::from(l2.capped);
        }

        let next = match config.distill {
            DistillMode::Projection => project(&policy, &pairs)?,
            DistillMode::Gradient => distill_weighted(&policy, &pairs, config.lambda2, config.distill_steps)?,
        };
        let changed_states = (0..ns).filter(|&s| next.row(s) != policy.row(s)).count();
        policy = next;

        diagnostics.push(IterationDiagnostics {
            iteration,
            return_before,
            expected_return: expected_return(mdp, &policy, DEFAULT_DP_TOL)?,
            mean_l1,
            mean_l2: if weight_total > 0.0 { l2_total / weight_total } else { 0.0 },
            capped_l2,
            critic_steps,
            refinements: pairs.len(),
            changed_states,
            transcripts_monotone: monotone,
        });
    }
    Ok(NlacOutcome { policy, diagnostics })
}

/// Trains the successor table for `policy` to `critic_tol`, starting from
/// the previous iteration's table.
fn warm_exact_critic(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    config: &NlacConfig,
    table: &mut SuccessorTable,
    target: &mut SuccessorTable,
) -> Result<(f64, usize)> {
    let cfg = TdConfig {
        step_size: 1.0,
        target_tau: config.exact_target_tau,
        tol: config.critic_tol,
        max_sweeps: 1_000_000,
        mode: TdMode::Expected,
    };
    let out = td_successor_features_warm(mdp, policy, &cfg, table.clone(), target.clone())?;
    *table = out.table;
    *target = out.target;
    Ok((out.residual, out.sweeps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{dp_optimal_policy, gridworld};

    #[test]
    fn zero_iterations_returns_initial() {
        let g = gridworld(2, 2, (1, 1), 0.9).unwrap();
        let cfg = NlacConfig { iterations: 0, ..NlacConfig::default() };
        let out = run_nlac(&g.mdp, &cfg).unwrap();
        assert_eq!(out.policy, TabularPolicy::uniform(5, 4));
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn exact_gridworld_reaches_optimum() {
        let g = gridworld(3, 3, (2, 2), 0.9).unwrap();
        let out = run_nlac(&g.mdp, &NlacConfig { iterations: 10, ..NlacConfig::default() }).unwrap();
        let (opt, _) = dp_optimal_policy(&g.mdp, 1e-12).unwrap();
        let j_opt = expected_return(&g.mdp, &opt, 1e-12).unwrap();
        let last = out.diagnostics.last().unwrap();
        assert!((last.expected_return - j_opt).abs() < 1e-6);
        assert!(out.diagnostics.iter().all(|d| d.expected_return >= d.return_before - 1e-6));
    }

    #[test]
    fn invalid_config_rejected() {
        let g = gridworld(2, 2, (1, 1), 0.9).unwrap();
        let cfg = NlacConfig { m: 0, ..NlacConfig::default() };
        assert!(matches!(run_nlac(&g.mdp, &cfg), Err(Error::Config(_))));
    }
}
