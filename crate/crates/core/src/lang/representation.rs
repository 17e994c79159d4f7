//! Temporal-difference learning of successor representations `Φ(s, a)`,
//! the vector the critic's sentiment is linear in.

use rand::Rng;

use crate::mdp::{sample_categorical, SuccessorTable, TabularMdp, TabularPolicy, Transition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TdMode {
    /// Expected update over the true kernel at every pair each sweep.
    Expected,
    /// One sampled `(s', a')` per pair each sweep.
    Sampled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdConfig {
    pub step_size: f64,
    /// EMA rate of the bootstrap target.
    pub target_tau: f64,
    /// Stop once the Bellman residual certifies sup-norm error ≤ `tol`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub mode: TdMode,
}

impl Default for TdConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            target_tau: 0.05,
            tol: 1e-9,
            max_sweeps: 1_000_000,
            mode: TdMode::Expected,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TdResult {
    pub table: SuccessorTable,
    pub target: SuccessorTable,
    pub sweeps: usize,
    /// `‖φ + γ P^π Φ − Φ‖∞` of the returned table.
    pub residual: f64,
}

/// Bellman residual of `table` under `(mdp, policy)`.
pub fn successor_residual(mdp: &TabularMdp, policy: &TabularPolicy, table: &SuccessorTable) -> f64 {
    let mut scratch = vec![0.0; table.dim()];
    let mut worst: f64 = 0.0;
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            expected_target(mdp, policy, table, s, a, &mut scratch);
            for (t, v) in scratch.iter().zip(table.get(s, a)) {
                worst = worst.max((t - v).abs());
            }
        }
    }
    worst
}

/// `φ(s) + γ E_{s', a'}[Φ̄(s', a')]` into `out`.
fn expected_target(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    target: &SuccessorTable,
    s: usize,
    a: usize,
    out: &mut [f64],
) {
    out.copy_from_slice(mdp.features(s));
    let gamma = mdp.discount();
    for &(next, p) in mdp.successors(s, a) {
        for (a2, &q) in policy.row(next).iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            let w = gamma * p * q;
            for (o, v) in out.iter_mut().zip(target.get(next, a2)) {
                *o += w * v;
            }
        }
    }
}

/// One TD update of `table` at `(s, a)` from an observed `(s', a')` with a
/// frozen bootstrap table. Returns the L1 norm of the TD error.
pub fn td_update(
    mdp: &TabularMdp,
    table: &mut SuccessorTable,
    target: &SuccessorTable,
    transition: &Transition,
    next_action: usize,
    step_size: f64,
) -> f64 {
    let gamma = mdp.discount();
    let features = mdp.features(transition.state);
    let bootstrap = target.get(transition.next_state, next_action).to_vec();
    let row = table.get_mut(transition.state, transition.action);
    let mut l1 = 0.0;
    for ((v, f), b) in row.iter_mut().zip(features).zip(&bootstrap) {
        let err = f + gamma * b - *v;
        l1 += err.abs();
        *v += step_size * err;
    }
    l1
}

/// `target ← τ·table + (1 − τ)·target`, coordinate-wise.
pub fn blend_target(target: &mut SuccessorTable, table: &SuccessorTable, tau: f64) {
    for (t, c) in target.as_mut_slice().iter_mut().zip(table.as_slice()) {
        *t = tau * c + (1.0 - tau) * *t;
    }
}

pub fn td_successor_features(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    config: &TdConfig,
) -> Result<TdResult> {
    let table = SuccessorTable::zeros(mdp.num_states(), mdp.num_actions(), mdp.feature_dim());
    let target = table.clone();
    td_successor_features_warm(mdp, policy, config, table, target)
}

fn validate(mdp: &TabularMdp, policy: &TabularPolicy, config: &TdConfig) -> Result<()> {
    policy.check_against(mdp)?;
    if !(config.step_size > 0.0 && config.step_size <= 1.0) {
        return Err(Error::Config("TD step size must lie in (0, 1]".into()));
    }
    if !(config.target_tau > 0.0 && config.target_tau <= 1.0) {
        return Err(Error::Config("target EMA rate must lie in (0, 1]".into()));
    }
    if !(config.tol > 0.0) {
        return Err(Error::Config("TD tolerance must be positive".into()));
    }
    Ok(())
}

/// As [`td_successor_features`], continuing from existing online and target
/// tables.
pub fn td_successor_features_warm(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    config: &TdConfig,
    mut table: SuccessorTable,
    mut target: SuccessorTable,
) -> Result<TdResult> {
    let (ns, na, dim) = (mdp.num_states(), mdp.num_actions(), mdp.feature_dim());
    if table.num_states() != ns || table.num_actions() != na || table.dim() != dim {
        return Err(Error::ShapeMismatch { left: ns * na * dim, right: table.as_slice().len() });
    }
    if target.as_slice().len() != table.as_slice().len() {
        return Err(Error::ShapeMismatch { left: table.as_slice().len(), right: target.as_slice().len() });
    }
    validate(mdp, policy, config)?;
    let threshold = config.tol * (1.0 - mdp.discount());
    let mut rng = crate::rng::seeded(match config.mode {
        TdMode::Sampled { seed } => seed,
        TdMode::Expected => 0,
    });
    let mut scratch = vec![0.0; dim];
    let mut residual = successor_residual(mdp, policy, &table);
    for sweep in 0..config.max_sweeps {
        if residual <= threshold {
            return Ok(TdResult { table, target, sweeps: sweep, residual });
        }
        for s in 0..ns {
            for a in 0..na {
                match config.mode {
                    TdMode::Expected => {
                        expected_target(mdp, policy, &target, s, a, &mut scratch);
                        for (v, t) in table.get_mut(s, a).iter_mut().zip(&scratch) {
                            *v += config.step_size * (t - *v);
                        }
                    }
                    TdMode::Sampled { .. } => {
                        let t = sample_step(mdp, policy, s, a, &mut rng);
                        td_update(mdp, &mut table, &target, &t.0, t.1, config.step_size);
                    }
                }
            }
        }
        blend_target(&mut target, &table, config.target_tau);
        residual = successor_residual(mdp, policy, &table);
    }
    if residual <= threshold {
        return Ok(TdResult { table, target, sweeps: config.max_sweeps, residual });
    }
    Err(Error::NonConvergence {
        what: "successor representation TD",
        iterations: config.max_sweeps,
        residual,
    })
}

fn sample_step<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    s: usize,
    a: usize,
    rng: &mut R,
) -> (Transition, usize) {
    let succ = mdp.successors(s, a);
    let probs: Vec<f64> = succ.iter().map(|&(_, p)| p).collect();
    let next_state = succ[sample_categorical(&probs, rng)].0;
    let next_action = policy.sample_action(next_state, rng);
    let t = Transition {
        state: s,
        action: a,
        reward: mdp.reward(s),
        next_state,
        done: mdp.is_terminal(next_state),
    };
    (t, next_action)
}
