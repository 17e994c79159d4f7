//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use nlac_core::mdp::{TabularMdp, TabularPolicy};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `P^π` over state-action pairs, dense.
fn pair_kernel(mdp: &TabularMdp, policy: &TabularPolicy) -> DMatrix<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let n = ns * na;
    DMatrix::from_fn(n, n, |i, j| {
        let (s, a) = (i / na, i % na);
        let (s2, a2) = (j / na, j % na);
        mdp.transition_prob(s, a, s2) * policy.prob(s2, a2)
    })
}

/// `Q^π = (I − γP^π)^{-1} r`, indexed `s * |A| + a`.
pub fn solve_q(mdp: &TabularMdp, policy: &TabularPolicy) -> Vec<f64> {
    let na = mdp.num_actions();
    let n = mdp.num_states() * na;
    let system = DMatrix::identity(n, n) - pair_kernel(mdp, policy) * mdp.discount();
    let r = DVector::from_fn(n, |i, _| {
        mdp.features(i / na)
            .iter()
            .zip(mdp.reward_weights())
            .map(|(f, w)| f * w)
            .sum::<f64>()
    });
    system.lu().solve(&r).expect("nonsingular").iter().copied().collect()
}

/// `Ψ^π`, one row of length `d` per pair.
pub fn solve_psi(mdp: &TabularMdp, policy: &TabularPolicy) -> Vec<Vec<f64>> {
    let na = mdp.num_actions();
    let n = mdp.num_states() * na;
    let d = mdp.feature_dim();
    let system = DMatrix::identity(n, n) - pair_kernel(mdp, policy) * mdp.discount();
    let phi = DMatrix::from_fn(n, d, |i, k| mdp.features(i / na)[k]);
    let psi = system.lu().solve(&phi).expect("nonsingular");
    (0..n).map(|i| psi.row(i).iter().copied().collect()).collect()
}

fn draw(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Mean discounted return of `episodes` rollouts from `(s, a)`, cut off once
/// `γ^t` falls below `1e-8`.
pub fn monte_carlo_q(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    s: usize,
    a: usize,
    episodes: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = mdp.discount();
    let mut total = 0.0;
    for _ in 0..episodes {
        let (mut state, mut action) = (s, a);
        let mut weight = 1.0;
        let mut ret = 0.0;
        while weight > 1e-8 {
            ret += weight * mdp.reward(state);
            if mdp.is_terminal(state) {
                break;
            }
            state = draw(mdp.transition_row(state, action), &mut rng);
            action = draw(policy.row(state), &mut rng);
            weight *= gamma;
        }
        total += ret;
    }
    total / episodes as f64
}

fn fmt_reward(r: f64) -> String {
    format!("{:?}", if r == 0.0 { 0.0 } else { r })
}

/// Exact law of the `H`-step rollout record from `(s, a)`, keyed by the
/// canonical text of the record. Each step lists the state entered, the
/// action then taken and the reward of the state left.
pub fn enumerate_rollouts(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    s: usize,
    a: usize,
    horizon: usize,
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let mut stack = vec![(s, a, Vec::<String>::new(), 1.0, None::<f64>)];
    while let Some((state, action, steps, p, outcome)) = stack.pop() {
        if steps.len() == horizon || outcome.is_some() {
            let tail = match outcome {
                Some(r) => format!("terminal r={}", fmt_reward(r)),
                None => "open".to_string(),
            };
            let key = format!("γ={:?} | {} | {}", mdp.discount(), steps.join(" ; "), tail);
            *out.entry(key).or_insert(0.0) += p;
            continue;
        }
        let reward = mdp.reward(state);
        for (next, &pt) in mdp.transition_row(state, action).iter().enumerate() {
            if pt == 0.0 {
                continue;
            }
            for (next_action, &pa) in policy.row(next).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                let mut steps = steps.clone();
                steps.push(format!("s{next} a{next_action} r={}", fmt_reward(reward)));
                let outcome = mdp.is_terminal(next).then_some(reward);
                stack.push((next, next_action, steps, p * pt * pa, outcome));
            }
        }
    }
    out
}

pub fn tv(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Every deterministic policy of an MDP, as action lists.
pub fn all_deterministic(num_states: usize, num_actions: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..num_states {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..num_actions).map(move |a| {
                    let mut p = p.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}
