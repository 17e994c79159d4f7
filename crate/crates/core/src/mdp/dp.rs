use super::{argmax, dot, QTable, SuccessorTable, TabularMdp, TabularPolicy};
use crate::{Error, Result};

pub const DEFAULT_DP_TOL: f64 = 1e-9;
pub const MAX_DP_ITERATIONS: usize = 1_000_000;

/// Stopping threshold on successive iterates that guarantees the returned
/// iterate is within `tol` of the fixed point for a γ-contraction.
fn step_threshold(tol: f64, discount: f64) -> f64 {
    if discount == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - discount) / discount
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("tolerance must be positive, got {tol}")))
    }
}

/// Policy evaluation: fixed point of `Q(s,a) = r(s) + γ E_{s',a'~P^π} Q(s',a')`
/// to sup-norm `tol`.
pub fn dp_q_values(mdp: &TabularMdp, policy: &TabularPolicy, tol: f64) -> Result<QTable> {
    check_tol(tol)?;
    policy.check_against(mdp)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let threshold = step_threshold(tol, gamma);
    let mut q = QTable::zeros(ns, na);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_DP_ITERATIONS {
        let v = q.state_values(policy);
        let next = QTable::from_fn(ns, na, |s, a| {
            let future: f64 = mdp.successors(s, a).iter().map(|&(n, p)| p * v[n]).sum();
            mdp.reward(s) + gamma * future
        });
        residual = next.sup_distance(&q);
        q = next;
        if residual <= threshold {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence {
        what: "policy evaluation",
        iterations: MAX_DP_ITERATIONS,
        residual,
    })
}

/// Successor features: fixed point of `Ψ(s,a) = φ(s) + γ E_{s',a'~P^π} Ψ(s',a')`.
pub fn dp_successor_features(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    tol: f64,
) -> Result<SuccessorTable> {
    check_tol(tol)?;
    policy.check_against(mdp)?;
    let (ns, na, dim) = (mdp.num_states(), mdp.num_actions(), mdp.feature_dim());
    let gamma = mdp.discount();
    let threshold = step_threshold(tol, gamma);
    let mut psi = SuccessorTable::zeros(ns, na, dim);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_DP_ITERATIONS {
        // Expected next-state successor features under π.
        let mut state_psi = vec![0.0; ns * dim];
        for s in 0..ns {
            for a in 0..na {
                let p = policy.prob(s, a);
                if p == 0.0 {
                    continue;
                }
                for (k, x) in psi.get(s, a).iter().enumerate() {
                    state_psi[s * dim + k] += p * x;
                }
            }
        }
        let mut next = SuccessorTable::zeros(ns, na, dim);
        for s in 0..ns {
            for a in 0..na {
                let out = next.get_mut(s, a);
                out.copy_from_slice(mdp.features(s));
                for &(n, p) in mdp.successors(s, a) {
                    for k in 0..dim {
                        out[k] += gamma * p * state_psi[n * dim + k];
                    }
                }
            }
        }
        residual = next.sup_distance(&psi);
        psi = next;
        if residual <= threshold {
            return Ok(psi);
        }
    }
    Err(Error::NonConvergence {
        what: "successor features",
        iterations: MAX_DP_ITERATIONS,
        residual,
    })
}

/// Value iteration. Returns the greedy deterministic policy (lowest action
/// index on exact ties) and `Q*`.
pub fn dp_optimal_policy(mdp: &TabularMdp, tol: f64) -> Result<(TabularPolicy, QTable)> {
    check_tol(tol)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let threshold = step_threshold(tol, gamma);
    let mut q = QTable::zeros(ns, na);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_DP_ITERATIONS {
        let v: Vec<f64> = (0..ns)
            .map(|s| q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let next = QTable::from_fn(ns, na, |s, a| {
            let future: f64 = mdp.successors(s, a).iter().map(|&(n, p)| p * v[n]).sum();
            mdp.reward(s) + gamma * future
        });
        residual = next.sup_distance(&q);
        q = next;
        if residual <= threshold {
            let greedy: Vec<usize> = (0..ns).map(|s| argmax(q.row(s))).collect();
            return Ok((TabularPolicy::deterministic(&greedy, na), q));
        }
    }
    Err(Error::NonConvergence {
        what: "value iteration",
        iterations: MAX_DP_ITERATIONS,
        residual,
    })
}

/// `J(π) = Σ_s ρ(s) Σ_a π(a|s) Q^π(s,a)`.
pub fn expected_return(mdp: &TabularMdp, policy: &TabularPolicy, tol: f64) -> Result<f64> {
    let q = dp_q_values(mdp, policy, tol)?;
    Ok(dot(mdp.initial_dist(), &q.state_values(policy)))
}
