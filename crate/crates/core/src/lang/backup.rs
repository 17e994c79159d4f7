use rand::Rng;

use super::{Combinator, DescriptionDistribution, DescriptionTable, DEFAULT_SUPPORT_CAP};
use crate::mdp::{sample_categorical, TabularMdp, TabularPolicy, Transition};
use crate::{Error, Result};

/// One-step dynamics the backup draws `(r, s')` from: either the true MDP or
/// the empirical kernel of a transition dataset.
pub trait TransitionKernel {
    /// Next states with positive probability, or `None` if the pair is
    /// unknown to the kernel.
    fn next_states(&self, state: usize, action: usize) -> Option<&[(usize, f64)]>;

    fn reward(&self, state: usize, action: usize) -> f64;
}

impl TransitionKernel for TabularMdp {
    fn next_states(&self, state: usize, action: usize) -> Option<&[(usize, f64)]> {
        Some(self.successors(state, action))
    }

    fn reward(&self, state: usize, _action: usize) -> f64 {
        TabularMdp::reward(self, state)
    }
}

/// Maximum-likelihood kernel of an off-policy transition dataset.
#[derive(Debug, Clone)]
pub struct EmpiricalKernel {
    num_actions: usize,
    next: Vec<Option<Vec<(usize, f64)>>>,
    rewards: Vec<f64>,
    counts: Vec<usize>,
}

impl EmpiricalKernel {
    pub fn from_transitions(
        num_states: usize,
        num_actions: usize,
        transitions: &[Transition],
    ) -> Result<Self> {
        let pairs = num_states * num_actions;
        let mut counts = vec![0usize; pairs];
        let mut reward_sums = vec![0.0; pairs];
        let mut reward_range = vec![(f64::INFINITY, f64::NEG_INFINITY); pairs];
        let mut next_counts = vec![std::collections::BTreeMap::<usize, usize>::new(); pairs];
        for t in transitions {
            if t.state >= num_states || t.next_state >= num_states {
                return Err(Error::StateOutOfRange(t.state.max(t.next_state)));
            }
            if t.action >= num_actions {
                return Err(Error::ActionOutOfRange(t.action));
            }
            let idx = t.state * num_actions + t.action;
            counts[idx] += 1;
            reward_sums[idx] += t.reward;
            let (lo, hi) = &mut reward_range[idx];
            *lo = lo.min(t.reward);
            *hi = hi.max(t.reward);
            *next_counts[idx].entry(t.next_state).or_insert(0) += 1;
        }
        let next = next_counts
            .into_iter()
            .zip(&counts)
            .map(|(m, &n)| {
                (n > 0).then(|| {
                    m.into_iter()
                        .map(|(s, c)| (s, c as f64 / n as f64))
                        .collect()
                })
            })
            .collect();
        // a constant reward is kept bit-exact rather than re-derived as a mean
        let rewards = reward_sums
            .iter()
            .zip(&counts)
            .zip(&reward_range)
            .map(|((&r, &n), &(lo, hi))| match n {
                0 => 0.0,
                _ if lo == hi => lo,
                _ => r / n as f64,
            })
            .collect();
        Ok(Self {
            num_actions,
            next,
            rewards,
            counts,
        })
    }

    pub fn visits(&self, state: usize, action: usize) -> usize {
        self.counts[state * self.num_actions + action]
    }

    pub fn covered_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, _)| (i / self.num_actions, i % self.num_actions))
    }
}

impl TransitionKernel for EmpiricalKernel {
    fn next_states(&self, state: usize, action: usize) -> Option<&[(usize, f64)]> {
        self.next
            .get(state * self.num_actions + action)
            .and_then(|n| n.as_deref())
    }

    fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.num_actions + action]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackupMode {
    /// Exact pushforward of `P^π ⊗ M` through the combinator.
    Exact,
    /// Empirical distribution of `samples` draws.
    Sampled { samples: usize, seed: u64 },
}

/// Language Bellman backup `B_L M(·|s, a)` under the MDP's own dynamics.
pub fn language_bellman_backup(
    model: &DescriptionTable,
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    state: usize,
    action: usize,
    mode: BackupMode,
) -> Result<DescriptionDistribution> {
    let combinator = Combinator::new(mdp, model.horizon())?;
    let mut out = match mode {
        BackupMode::Exact => exact_backup(&combinator, mdp, model, policy, state, action)?,
        BackupMode::Sampled { samples, seed } => {
            let mut rng = crate::rng::seeded(seed);
            sampled_backup(&combinator, mdp, model, policy, state, action, samples, &mut rng)?
        }
    };
    out.cap_support(DEFAULT_SUPPORT_CAP);
    Ok(out)
}

pub(crate) fn exact_backup<K: TransitionKernel + ?Sized>(
    combinator: &Combinator<'_>,
    kernel: &K,
    model: &DescriptionTable,
    policy: &TabularPolicy,
    state: usize,
    action: usize,
) -> Result<DescriptionDistribution> {
    let mdp = combinator.mdp();
    let next = kernel
        .next_states(state, action)
        .ok_or(Error::Uncovered { state, action })?;
    let reward = kernel.reward(state, action);
    let empty = combinator.empty();
    let mut target = DescriptionDistribution::default();
    for &(next_state, p) in next {
        for (next_action, &q) in policy.row(next_state).iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            if mdp.is_terminal(next_state) {
                target.accumulate(combinator.combine(reward, next_state, next_action, &empty), p * q);
                continue;
            }
            let future = model.require(next_state, next_action)?;
            for (d, m) in future.iter() {
                target.accumulate(combinator.combine(reward, next_state, next_action, d), p * q * m);
            }
        }
    }
    target.normalize()?;
    Ok(target)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sampled_backup<K: TransitionKernel + ?Sized, R: Rng + ?Sized>(
    combinator: &Combinator<'_>,
    kernel: &K,
    model: &DescriptionTable,
    policy: &TabularPolicy,
    state: usize,
    action: usize,
    samples: usize,
    rng: &mut R,
) -> Result<DescriptionDistribution> {
    if samples == 0 {
        return Err(Error::Config("sampled backup needs at least one sample".into()));
    }
    let next = kernel
        .next_states(state, action)
        .ok_or(Error::Uncovered { state, action })?;
    let probs: Vec<f64> = next.iter().map(|&(_, p)| p).collect();
    let mut draws = Vec::with_capacity(samples);
    for _ in 0..samples {
        draws.push(sample_target(combinator, kernel, model, policy, state, action, next, &probs, rng)?);
    }
    DescriptionDistribution::empirical(draws)
}

/// One target description for `(s, a)`: draw `s'`, then `a' ~ π(·|s')`, then
/// `d' ~ M(·|s', a')`, and combine.
#[allow(clippy::too_many_arguments)]
fn sample_target<K: TransitionKernel + ?Sized, R: Rng + ?Sized>(
    combinator: &Combinator<'_>,
    kernel: &K,
    model: &DescriptionTable,
    policy: &TabularPolicy,
    state: usize,
    action: usize,
    next: &[(usize, f64)],
    probs: &[f64],
    rng: &mut R,
) -> Result<super::RolloutDescription> {
    let next_state = next[sample_categorical(probs, rng)].0;
    sample_target_from(combinator, kernel.reward(state, action), model, policy, next_state, rng)
}

/// Target description from an observed `(r, s')`.
pub(crate) fn sample_target_from<R: Rng + ?Sized>(
    combinator: &Combinator<'_>,
    reward: f64,
    model: &DescriptionTable,
    policy: &TabularPolicy,
    next_state: usize,
    rng: &mut R,
) -> Result<super::RolloutDescription> {
    let next_action = policy.sample_action(next_state, rng);
    if combinator.mdp().is_terminal(next_state) {
        return Ok(combinator.combine(reward, next_state, next_action, &combinator.empty()));
    }
    let future = model.require(next_state, next_action)?.sample(rng);
    Ok(combinator.combine(reward, next_state, next_action, future))
}
