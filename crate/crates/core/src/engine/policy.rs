use std::collections::BTreeMap;

use super::loss::{l2_logit_gradient, softmax};
use crate::mdp::TabularPolicy;
use crate::{Error, Result};

/// Most negative logit used when converting zero probabilities.
const LOGIT_FLOOR: f64 = -50.0;

/// Tabular softmax policy over per-state logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    num_actions: usize,
    logits: Vec<f64>,
}

impl SoftmaxPolicy {
    pub fn from_policy(policy: &TabularPolicy) -> Self {
        let logits = (0..policy.num_states())
            .flat_map(|s| policy.row(s).iter().map(|p| p.ln().max(LOGIT_FLOOR)).collect::<Vec<_>>())
            .collect();
        Self {
            num_actions: policy.num_actions(),
            logits,
        }
    }

    pub fn logits(&self, state: usize) -> &[f64] {
        &self.logits[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn logits_mut(&mut self, state: usize) -> &mut [f64] {
        &mut self.logits[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn probs(&self, state: usize) -> Vec<f64> {
        softmax(self.logits(state))
    }
}

/// Gradient descent on the mean `L2` of each state's refined actions.
/// States without pairs keep their rows exactly.
pub fn distill(
    policy: &TabularPolicy,
    pairs: &[(usize, usize)],
    step_size: f64,
    steps: usize,
) -> Result<TabularPolicy> {
    let weighted: Vec<(usize, usize, f64)> = pairs.iter().map(|&(s, a)| (s, a, 1.0)).collect();
    distill_weighted(policy, &weighted, step_size, steps)
}

/// As [`distill`] with a weight per pair.
pub fn distill_weighted(
    policy: &TabularPolicy,
    pairs: &[(usize, usize, f64)],
    step_size: f64,
    steps: usize,
) -> Result<TabularPolicy> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::Config(format!("distillation step size {step_size} must be positive")));
    }
    let by_state = group(policy, pairs.iter().copied())?;
    let mut soft = SoftmaxPolicy::from_policy(policy);
    let mut rows = policy.rows();
    for (&state, counts) in &by_state {
        let total: f64 = counts.iter().sum();
        if total == 0.0 {
            continue;
        }
        for _ in 0..steps {
            let logits = soft.logits(state).to_vec();
            let mut grad = vec![0.0; logits.len()];
            for (a, &c) in counts.iter().enumerate() {
                if c > 0.0 {
                    for (g, d) in grad.iter_mut().zip(l2_logit_gradient(&logits, a)) {
                        *g += c / total * d;
                    }
                }
            }
            for (l, g) in soft.logits_mut(state).iter_mut().zip(grad) {
                *l -= step_size * g;
            }
        }
        rows[state] = soft.probs(state);
    }
    TabularPolicy::new(rows)
}

/// Closed-form minimizer of the weighted `L2`: each state with pairs takes
/// the weighted empirical distribution of its refined actions.
pub fn project(policy: &TabularPolicy, pairs: &[(usize, usize, f64)]) -> Result<TabularPolicy> {
    let by_state = group(policy, pairs.iter().copied())?;
    let mut rows = policy.rows();
    for (state, counts) in by_state {
        let total: f64 = counts.iter().sum();
        if total > 0.0 {
            rows[state] = counts.iter().map(|c| c / total).collect();
        }
    }
    TabularPolicy::new(rows)
}

fn group(
    policy: &TabularPolicy,
    pairs: impl Iterator<Item = (usize, usize, f64)>,
) -> Result<BTreeMap<usize, Vec<f64>>> {
    let mut by_state: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (s, a, w) in pairs {
        if s >= policy.num_states() {
            return Err(Error::StateOutOfRange(s));
        }
        if a >= policy.num_actions() {
            return Err(Error::ActionOutOfRange(a));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Config(format!("pair weight {w} must be finite and ≥ 0")));
        }
        by_state.entry(s).or_insert_with(|| vec![0.0; policy.num_actions()])[a] += w;
    }
    Ok(by_state)
}
