//! Finite MDPs whose reward is linear in a state feature map, together with
//! the exact dynamic-programming oracles every other module is checked
//! against.

mod dp;
mod generate;

pub use dp::{
    dp_optimal_policy, dp_q_values, dp_successor_features, expected_return, DEFAULT_DP_TOL,
    MAX_DP_ITERATIONS,
};
pub use generate::{gridworld, random_mdp, random_policy, GridAction, Gridworld, RandomMdpSpec};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MDP_SCHEMA_VERSION: u32 = 1;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite MDP with reward `r(s, a) = φ(s)·w`.
///
/// Terminal states are absorbing: every action self-loops and the feature
/// vector is zero, so discounted sums stop accumulating once one is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpFile", into = "MdpFile")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    /// Row-major `(s, a, s')`.
    transition: Vec<f64>,
    features: Vec<Vec<f64>>,
    reward_weights: Vec<f64>,
    discount: f64,
    initial_dist: Vec<f64>,
    terminal: Vec<bool>,
    /// Cached `φ(s)·w`.
    rewards: Vec<f64>,
    /// Cached sparse successor lists per `(s, a)`.
    successors: Vec<Vec<(usize, f64)>>,
}

/// On-disk layout: explicit nested matrices so fixtures stay reviewable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub schema_version: u32,
    pub discount: f64,
    /// `transition[s][a][s']`
    pub transition: Vec<Vec<Vec<f64>>>,
    pub features: Vec<Vec<f64>>,
    pub reward_weights: Vec<f64>,
    pub initial_dist: Vec<f64>,
    #[serde(default)]
    pub terminal_states: Vec<usize>,
}

impl TabularMdp {
    /// Builds and validates an MDP. `transition[s][a]` is the next-state row.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        features: Vec<Vec<f64>>,
        reward_weights: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
        terminal_states: &[usize],
    ) -> Result<Self> {
        let num_states = transition.len();
        if num_states == 0 {
            return Err(Error::InvalidMdp("no states".into()));
        }
        let num_actions = transition[0].len();
        if num_actions == 0 {
            return Err(Error::InvalidMdp("no actions".into()));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidMdp(format!("discount {discount} outside [0, 1)")));
        }
        if features.len() != num_states {
            return Err(Error::InvalidMdp(format!(
                "{} feature rows for {num_states} states",
                features.len()
            )));
        }
        let dim = reward_weights.len();
        for (s, row) in features.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidMdp(format!(
                    "feature row {s} has length {} but reward weights have length {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMdp(format!("feature row {s} is not finite")));
            }
        }
        if reward_weights.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMdp("reward weights are not finite".into()));
        }
        check_distribution(&initial_dist, num_states, "initial distribution")?;

        let mut flat = Vec::with_capacity(num_states * num_actions * num_states);
        for (s, per_action) in transition.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(Error::InvalidMdp(format!(
                    "state {s} has {} actions, expected {num_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                check_distribution(row, num_states, &format!("transition row ({s}, {a})"))?;
                flat.extend_from_slice(row);
            }
        }

        let mut terminal = vec![false; num_states];
        for &t in terminal_states {
            if t >= num_states {
                return Err(Error::StateOutOfRange(t));
            }
            terminal[t] = true;
            if features[t].iter().any(|&x| x != 0.0) {
                return Err(Error::InvalidMdp(format!(
                    "terminal state {t} must have a zero feature vector"
                )));
            }
            for a in 0..num_actions {
                if flat[(t * num_actions + a) * num_states + t] != 1.0 {
                    return Err(Error::InvalidMdp(format!(
                        "terminal state {t} must self-loop under action {a}"
                    )));
                }
            }
        }

        let rewards = features
            .iter()
            .map(|row| dot(row, &reward_weights))
            .collect();
        let successors = (0..num_states * num_actions)
            .map(|sa| {
                flat[sa * num_states..(sa + 1) * num_states]
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(s, &p)| (s, p))
                    .collect()
            })
            .collect();

        Ok(Self {
            num_states,
            num_actions,
            transition: flat,
            features,
            reward_weights,
            discount,
            initial_dist,
            terminal,
            rewards,
            successors,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn feature_dim(&self) -> usize {
        self.reward_weights.len()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn features(&self, state: usize) -> &[f64] {
        &self.features[state]
    }

    pub fn reward_weights(&self) -> &[f64] {
        &self.reward_weights
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn terminal_states(&self) -> Vec<usize> {
        (0..self.num_states).filter(|&s| self.terminal[s]).collect()
    }

    /// `r(s, a) = φ(s)·w`; the action does not enter.
    pub fn reward(&self, state: usize) -> f64 {
        self.rewards[state]
    }

    pub fn transition_prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.transition[(state * self.num_actions + action) * self.num_states + next]
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    /// Next states with positive probability.
    pub fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.successors[state * self.num_actions + action]
    }

    /// Largest `|r|/(1-γ)`, the bound on any discounted return.
    pub fn value_bound(&self) -> f64 {
        let rmax = self.rewards.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        rmax / (1.0 - self.discount)
    }

    /// Same dynamics with reward weights replaced.
    pub fn with_reward_weights(&self, reward_weights: Vec<f64>) -> Result<Self> {
        let file = MdpFile::from(self.clone());
        Self::new(
            file.transition,
            file.features,
            reward_weights,
            file.discount,
            file.initial_dist,
            &file.terminal_states,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

impl TryFrom<MdpFile> for TabularMdp {
    type Error = Error;

    fn try_from(file: MdpFile) -> Result<Self> {
        if file.schema_version != MDP_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: file.schema_version,
                expected: MDP_SCHEMA_VERSION,
            });
        }
        Self::new(
            file.transition,
            file.features,
            file.reward_weights,
            file.discount,
            file.initial_dist,
            &file.terminal_states,
        )
    }
}

impl From<TabularMdp> for MdpFile {
    fn from(mdp: TabularMdp) -> Self {
        let transition = (0..mdp.num_states)
            .map(|s| {
                (0..mdp.num_actions)
                    .map(|a| mdp.transition_row(s, a).to_vec())
                    .collect()
            })
            .collect();
        let terminal_states = mdp.terminal_states();
        MdpFile {
            schema_version: MDP_SCHEMA_VERSION,
            discount: mdp.discount,
            transition,
            features: mdp.features,
            reward_weights: mdp.reward_weights,
            initial_dist: mdp.initial_dist,
            terminal_states,
        }
    }
}

fn check_distribution(row: &[f64], len: usize, what: &str) -> Result<()> {
    if row.len() != len {
        return Err(Error::InvalidMdp(format!(
            "{what} has length {}, expected {len}",
            row.len()
        )));
    }
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidMdp(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidMdp(format!("{what} sums to {total}")));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stochastic tabular policy `π(a | s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TabularPolicy {
    num_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_actions = rows.first().map(Vec::len).unwrap_or(0);
        if num_actions == 0 {
            return Err(Error::InvalidPolicy("empty policy".into()));
        }
        let mut probs = Vec::with_capacity(rows.len() * num_actions);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::InvalidPolicy(format!("row {s} has wrong length")));
            }
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!("row {s} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {total}")));
            }
            probs.extend_from_slice(row);
        }
        Ok(Self { num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// Deterministic policy from one action per state.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Self {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * num_actions + a] = 1.0;
        }
        Self { num_actions, probs }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.probs.chunks(self.num_actions).map(<[f64]>::to_vec).collect()
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        sample_categorical(self.row(state), rng)
    }

    /// Most probable action per state, lowest index on ties.
    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..self.num_states())
            .map(|s| argmax(self.row(s)))
            .collect()
    }

    pub(crate) fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.num_states() != mdp.num_states() || self.num_actions != mdp.num_actions() {
            return Err(Error::InvalidPolicy(format!(
                "policy shape {}x{} does not match mdp {}x{}",
                self.num_states(),
                self.num_actions,
                mdp.num_states(),
                mdp.num_actions()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for TabularPolicy {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<TabularPolicy> for Vec<Vec<f64>> {
    fn from(policy: TabularPolicy) -> Self {
        policy.rows()
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = i;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// `Q(s, a)` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                values.push(f(s, a));
            }
        }
        Self { num_actions, values }
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `V(s) = Σ_a π(a|s) Q(s, a)`.
    pub fn state_values(&self, policy: &TabularPolicy) -> Vec<f64> {
        (0..self.num_states())
            .map(|s| dot(self.row(s), policy.row(s)))
            .collect()
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Successor features `Ψ(s, a) ∈ R^d`, or a learned representation `Φ(s, a)`
/// of the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessorTable {
    num_actions: usize,
    dim: usize,
    values: Vec<f64>,
}

impl SuccessorTable {
    pub fn zeros(num_states: usize, num_actions: usize, dim: usize) -> Self {
        Self {
            num_actions,
            dim,
            values: vec![0.0; num_states * num_actions * dim],
        }
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / (self.num_actions * self.dim).max(1)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn get_mut(&mut self, state: usize, action: usize) -> &mut [f64] {
        let start = (state * self.num_actions + action) * self.dim;
        &mut self.values[start..start + self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `Q(s, a) = Ψ(s, a)·w`.
    pub fn q_values(&self, weights: &[f64]) -> QTable {
        QTable::from_fn(self.num_states(), self.num_actions, |s, a| {
            dot(self.get(s, a), weights)
        })
    }

    pub fn sup_distance(&self, other: &SuccessorTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// One environment step `(s, a, r, s', done)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub done: bool,
}

/// Draws `a ~ π(·|s)` and `s' ~ P(·|s, a)`. `done` is set when `s'` is
/// terminal, which includes stepping from a terminal state onto itself.
pub fn sample_transition<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    state: usize,
    rng: &mut R,
) -> Result<Transition> {
    if state >= mdp.num_states() {
        return Err(Error::StateOutOfRange(state));
    }
    let action = policy.sample_action(state, rng);
    let next_state = sample_categorical(mdp.transition_row(state, action), rng);
    Ok(Transition {
        state,
        action,
        reward: mdp.reward(state),
        next_state,
        done: mdp.is_terminal(next_state),
    })
}

/// Draws a start state from `ρ`.
pub fn sample_initial<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> usize {
    sample_categorical(mdp.initial_dist(), rng)
}
