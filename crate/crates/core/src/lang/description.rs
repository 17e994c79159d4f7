use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::mdp::TabularMdp;
use crate::{Error, Result};

/// One described future step: the `(state, action)` visited and the reward
/// earned on the transition into it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

impl Step {
    fn new(state: usize, action: usize, reward: f64) -> Self {
        // -0.0 and 0.0 must describe the same rollout
        let reward = if reward == 0.0 { 0.0 } else { reward };
        Self { state, action, reward }
    }
}

impl PartialEq for Step {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Step {}

impl Ord for Step {
    fn cmp(&self, other: &Self) -> Ordering {
        self.state
            .cmp(&other.state)
            .then(self.action.cmp(&other.action))
            .then(self.reward.total_cmp(&other.reward))
    }
}

impl PartialOrd for Step {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for Step {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.state.hash(state);
        self.action.hash(state);
        self.reward.to_bits().hash(state);
    }
}

/// Canonical symbolic description of a truncated future rollout.
///
/// Step `i` carries emphasis `γ^i`, so the step nearest the present weighs
/// most. `terminal_reward` is present iff the rollout reaches a terminal
/// state within the horizon; it repeats the reward earned entering that
/// state, which is always the last step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutDescription {
    discount: f64,
    steps: Vec<Step>,
    terminal_reward: Option<f64>,
}

impl RolloutDescription {
    /// The description of nothing: no steps, no outcome.
    pub fn empty(discount: f64) -> Self {
        Self {
            discount,
            steps: Vec::new(),
            terminal_reward: None,
        }
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn terminal_reward(&self) -> Option<f64> {
        self.terminal_reward
    }

    pub fn emphasis(&self) -> Vec<f64> {
        (0..self.steps.len())
            .map(|i| self.discount.powi(i as i32))
            .collect()
    }

    /// `Σ_i γ^i · reward_i`: the discounted return the description reports.
    pub fn value(&self) -> f64 {
        self.steps
            .iter()
            .zip(self.emphasis())
            .map(|(step, weight)| weight * step.reward)
            .sum()
    }

    /// Feature-space reading of the description: `φ` of the conditioning
    /// state plus `γ^{i+1} φ(state_i)` for every non-terminal step.
    pub fn feature_sum(&self, mdp: &TabularMdp, origin: usize) -> Vec<f64> {
        let mut out = mdp.features(origin).to_vec();
        let mut weight = self.discount;
        for step in &self.steps {
            for (o, f) in out.iter_mut().zip(mdp.features(step.state)) {
                *o += weight * f;
            }
            weight *= self.discount;
        }
        out
    }

    /// Injective text rendering, e.g.
    /// `γ=0.9 | s3 a1 r=0.5 ; s7 a0 r=0 | terminal r=0`.
    pub fn canonical(&self) -> String {
        let steps = self
            .steps
            .iter()
            .map(|s| format!("s{} a{} r={:?}", s.state, s.action, s.reward))
            .collect::<Vec<_>>()
            .join(" ; ");
        let outcome = match self.terminal_reward {
            Some(r) => format!("terminal r={r:?}"),
            None => "open".to_string(),
        };
        format!("γ={:?} | {steps} | {outcome}", self.discount)
    }
}

impl fmt::Display for RolloutDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl PartialEq for RolloutDescription {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RolloutDescription {}

impl Ord for RolloutDescription {
    fn cmp(&self, other: &Self) -> Ordering {
        self.discount
            .total_cmp(&other.discount)
            .then_with(|| self.steps.cmp(&other.steps))
            .then_with(|| match (self.terminal_reward, other.terminal_reward) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (Some(a), Some(b)) => a.total_cmp(&b),
            })
    }
}

impl PartialOrd for RolloutDescription {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for RolloutDescription {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.discount.to_bits().hash(state);
        self.steps.hash(state);
        self.terminal_reward.map(f64::to_bits).hash(state);
    }
}

/// The `B` combinator over a fixed MDP and truncation horizon.
#[derive(Debug, Clone, Copy)]
pub struct Combinator<'a> {
    mdp: &'a TabularMdp,
    horizon: usize,
}

impl<'a> Combinator<'a> {
    pub fn new(mdp: &'a TabularMdp, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("description horizon must be at least 1".into()));
        }
        Ok(Self { mdp, horizon })
    }

    pub fn mdp(&self) -> &'a TabularMdp {
        self.mdp
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn empty(&self) -> RolloutDescription {
        RolloutDescription::empty(self.mdp.discount())
    }

    /// Prepends `(next_state, next_action)` to `future`, truncating to the
    /// horizon. A terminal `next_state` ends the rollout there and tags the
    /// outcome with `reward`.
    pub fn combine(
        &self,
        reward: f64,
        next_state: usize,
        next_action: usize,
        future: &RolloutDescription,
    ) -> RolloutDescription {
        let head = Step::new(next_state, next_action, reward);
        if self.mdp.is_terminal(next_state) {
            return RolloutDescription {
                discount: self.mdp.discount(),
                steps: vec![head],
                terminal_reward: Some(head.reward),
            };
        }
        let mut steps = Vec::with_capacity(self.horizon.min(future.steps.len() + 1));
        steps.push(head);
        let room = self.horizon - 1;
        steps.extend(future.steps.iter().take(room).copied());
        let terminal_reward = if future.steps.len() <= room {
            future.terminal_reward
        } else {
            None
        };
        RolloutDescription {
            discount: self.mdp.discount(),
            steps,
            terminal_reward,
        }
    }
}
