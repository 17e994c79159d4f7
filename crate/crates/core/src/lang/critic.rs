use super::{Combinator, Critique, DescriptionDistribution, Evaluator, RolloutDescription};
use crate::mdp::{dot, SuccessorTable, TabularMdp, TabularPolicy};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

/// Anything that can critique an action at a state.
pub trait Critic {
    fn num_actions(&self) -> usize;

    fn critique(&self, state: usize, action: usize) -> Result<Critique>;
}

/// Critic backed by a language successor model. With `samples = None` the
/// whole support of `M(·|s, a)` is used as the justification; otherwise `k`
/// descriptions are drawn.
#[derive(Debug, Clone, Copy)]
pub struct DescriptionCritic<'a> {
    evaluator: Evaluator<'a>,
    samples: Option<(usize, u64)>,
}

impl<'a> DescriptionCritic<'a> {
    pub fn new(evaluator: Evaluator<'a>) -> Self {
        Self { evaluator, samples: None }
    }

    pub fn sampled(evaluator: Evaluator<'a>, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("critic needs k ≥ 1 descriptions".into()));
        }
        Ok(Self {
            evaluator,
            samples: Some((k, seed)),
        })
    }
}

impl Critic for DescriptionCritic<'_> {
    fn num_actions(&self) -> usize {
        self.evaluator.model().num_actions()
    }

    fn critique(&self, state: usize, action: usize) -> Result<Critique> {
        let model = self.evaluator.model().require(state, action)?;
        match self.samples {
            None => self.evaluator.evaluate_weighted(
                state,
                action,
                model.iter().map(|(d, p)| (d.clone(), p)).collect(),
            ),
            Some((k, seed)) => {
                let stream = (state * self.num_actions() + action) as u64;
                let mut rng = seeded(derive_seed(seed, stream));
                let draws: Vec<RolloutDescription> =
                    (0..k).map(|_| model.sample(&mut rng).clone()).collect();
                self.evaluator.evaluate(state, action, &draws)
            }
        }
    }
}

/// Critic whose sentiment is `Φ(s, a)·w` for a learned successor table.
/// Its justification is the one-step future under the true dynamics.
#[derive(Debug, Clone)]
pub struct SuccessorCritic<'a> {
    mdp: &'a TabularMdp,
    policy: &'a TabularPolicy,
    table: &'a SuccessorTable,
    margin: f64,
}

impl<'a> SuccessorCritic<'a> {
    pub fn new(mdp: &'a TabularMdp, policy: &'a TabularPolicy, table: &'a SuccessorTable) -> Self {
        Self {
            mdp,
            policy,
            table,
            margin: super::DEFAULT_OPTIMALITY_MARGIN,
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    fn value(&self, state: usize, action: usize) -> f64 {
        dot(self.table.get(state, action), self.mdp.reward_weights())
    }
}

impl Critic for SuccessorCritic<'_> {
    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn critique(&self, state: usize, action: usize) -> Result<Critique> {
        if state >= self.mdp.num_states() {
            return Err(Error::StateOutOfRange(state));
        }
        if action >= self.mdp.num_actions() {
            return Err(Error::ActionOutOfRange(action));
        }
        let b = Combinator::new(self.mdp, 1)?;
        let reward = self.mdp.reward(state);
        let mut futures = DescriptionDistribution::default();
        for &(next, p) in self.mdp.successors(state, action) {
            for (a2, &q) in self.policy.row(next).iter().enumerate() {
                if q > 0.0 {
                    futures.accumulate(b.combine(reward, next, a2, &b.empty()), p * q);
                }
            }
        }
        let sentiment = self.value(state, action);
        let best = (0..self.num_actions())
            .map(|a| self.value(state, a))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Critique {
            optimal: best <= sentiment + self.margin,
            sentiment,
            justifications: futures.iter().map(|(d, p)| (d.clone(), p)).collect(),
        })
    }
}
