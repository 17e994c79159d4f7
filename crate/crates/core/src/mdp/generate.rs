use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TabularMdp, TabularPolicy};
use crate::rng::seeded;
use crate::Result;

/// Parameters for a seeded random MDP.
///
/// The last `num_terminal` states are absorbing with zero features. Each
/// `(s, a)` row spreads its mass over `branching` distinct next states (all
/// states when `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub feature_dim: usize,
    pub discount: f64,
    pub branching: Option<usize>,
    pub num_terminal: usize,
    pub seed: u64,
}

impl RandomMdpSpec {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        feature_dim: usize,
        discount: f64,
        seed: u64,
    ) -> Self {
        Self {
            num_states,
            num_actions,
            feature_dim,
            discount,
            branching: None,
            num_terminal: 1,
            seed,
        }
    }

    pub fn with_branching(mut self, branching: usize) -> Self {
        self.branching = Some(branching);
        self
    }

    pub fn with_terminals(mut self, num_terminal: usize) -> Self {
        self.num_terminal = num_terminal;
        self
    }
}

pub fn random_mdp(spec: &RandomMdpSpec) -> Result<TabularMdp> {
    let mut rng = seeded(spec.seed);
    let n = spec.num_states;
    let num_terminal = spec.num_terminal.min(n.saturating_sub(1));
    let first_terminal = n - num_terminal;
    let branching = spec.branching.unwrap_or(n).clamp(1, n);

    let mut transition = Vec::with_capacity(n);
    for s in 0..n {
        let mut per_action = Vec::with_capacity(spec.num_actions);
        for _ in 0..spec.num_actions {
            let mut row = vec![0.0; n];
            if s >= first_terminal {
                row[s] = 1.0;
            } else {
                let targets = sample(&mut rng, n, branching);
                let weights: Vec<f64> = (0..branching).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = weights.iter().sum();
                for (t, w) in targets.iter().zip(&weights) {
                    row[t] = w / total;
                }
                renormalize(&mut row);
            }
            per_action.push(row);
        }
        transition.push(per_action);
    }

    let features = (0..n)
        .map(|s| {
            if s >= first_terminal {
                vec![0.0; spec.feature_dim]
            } else {
                (0..spec.feature_dim).map(|_| rng.random_range(0.0..1.0)).collect()
            }
        })
        .collect();
    let reward_weights = (0..spec.feature_dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut initial_dist = vec![0.0; n];
    for p in initial_dist.iter_mut().take(first_terminal.max(1)) {
        *p = 1.0 / first_terminal.max(1) as f64;
    }
    renormalize(&mut initial_dist);

    let terminals: Vec<usize> = (first_terminal..n).collect();
    TabularMdp::new(
        transition,
        features,
        reward_weights,
        spec.discount,
        initial_dist,
        &terminals,
    )
}

/// Pushes floating-point residue onto the largest entry so the row sums to
/// one within a few ulps.
fn renormalize(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    for p in row.iter_mut() {
        *p /= total;
    }
    let residue = 1.0 - row.iter().sum::<f64>();
    let max_idx = super::argmax(row);
    row[max_idx] += residue;
}

/// Random fully-stochastic policy.
pub fn random_policy(num_states: usize, num_actions: usize, seed: u64) -> TabularPolicy {
    let mut rng = seeded(seed);
    let rows = (0..num_states)
        .map(|_| {
            let mut row: Vec<f64> = (0..num_actions).map(|_| rng.random_range(0.05..1.0)).collect();
            renormalize(&mut row);
            row
        })
        .collect();
    TabularPolicy::new(rows).expect("normalized rows")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [Self::Up, Self::Down, Self::Left, Self::Right];
}

/// Deterministic gridworld. The goal cell pays reward 1 once and then every
/// action moves to an absorbing exit state; bumping into a wall stays put.
#[derive(Debug, Clone)]
pub struct Gridworld {
    pub mdp: TabularMdp,
    pub width: usize,
    pub height: usize,
    pub goal: (usize, usize),
    pub exit: usize,
}

impl Gridworld {
    pub fn state(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        (state % self.width, state / self.width)
    }

    /// Manhattan distance to the goal, the BFS distance on an open grid.
    pub fn distance_to_goal(&self, state: usize) -> usize {
        let (x, y) = self.coords(state);
        x.abs_diff(self.goal.0) + y.abs_diff(self.goal.1)
    }
}

pub fn gridworld(
    width: usize,
    height: usize,
    goal: (usize, usize),
    discount: f64,
) -> Result<Gridworld> {
    let cells = width * height;
    let exit = cells;
    let n = cells + 1;
    let goal_state = goal.1 * width + goal.0;
    let mut transition = Vec::with_capacity(n);
    for s in 0..n {
        let mut per_action = Vec::with_capacity(4);
        for action in GridAction::ALL {
            let mut row = vec![0.0; n];
            let next = if s == exit || s == goal_state {
                exit
            } else {
                let (x, y) = (s % width, s / width);
                let (nx, ny) = match action {
                    GridAction::Up => (x, y.saturating_sub(1)),
                    GridAction::Down => (x, (y + 1).min(height - 1)),
                    GridAction::Left => (x.saturating_sub(1), y),
                    GridAction::Right => ((x + 1).min(width - 1), y),
                };
                ny * width + nx
            };
            row[next] = 1.0;
            per_action.push(row);
        }
        transition.push(per_action);
    }
    let features = (0..n)
        .map(|s| vec![if s == goal_state { 1.0 } else { 0.0 }])
        .collect();
    let mut initial_dist = vec![0.0; n];
    initial_dist[0] = 1.0;
    let mdp = TabularMdp::new(transition, features, vec![1.0], discount, initial_dist, &[exit])?;
    Ok(Gridworld {
        mdp,
        width,
        height,
        goal,
        exit,
    })
}
