use super::backup::{exact_backup, sampled_backup, EmpiricalKernel, TransitionKernel};
use super::{Combinator, DescriptionDistribution, DescriptionTable, DEFAULT_SUPPORT_CAP};
use crate::mdp::{TabularMdp, TabularPolicy, Transition};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitMode {
    /// Each round sets `M ← B_L M` exactly, the minimizer of `KL(B_L M ‖ M)`.
    Exact,
    /// Each round fits `M` to `samples_per_pair` target draws per pair (the
    /// cross-entropy minimizer) from the previous round's frozen model.
    Sampled { samples_per_pair: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub horizon: usize,
    pub divergence_tol: f64,
    pub max_iterations: usize,
    pub support_cap: usize,
    pub mode: FitMode,
}

impl FitConfig {
    pub fn exact(horizon: usize) -> Self {
        Self {
            horizon,
            divergence_tol: 1e-12,
            max_iterations: 1_000,
            support_cap: DEFAULT_SUPPORT_CAP,
            mode: FitMode::Exact,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub model: DescriptionTable,
    pub kernel: EmpiricalKernel,
    pub iterations: usize,
    /// Mean `KL(B_L M ‖ M)` over covered pairs at exit.
    pub residual: f64,
    /// Largest mass evicted by support capping in the final round.
    pub evicted_mass: f64,
}

/// Temporal-difference fit of the language successor model from off-policy
/// transitions. Pairs without data get no entry; the backup of a covered
/// pair that reaches an uncovered one fails with that pair's name.
pub fn fit_successor_model(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    transitions: &[Transition],
    config: &FitConfig,
) -> Result<FittedModel> {
    let kernel = EmpiricalKernel::from_transitions(mdp.num_states(), mdp.num_actions(), transitions)?;
    let pairs: Vec<(usize, usize)> = kernel.covered_pairs().collect();
    let (model, iterations, residual, evicted_mass) = fit_on_kernel(mdp, &kernel, &pairs, policy, config)?;
    Ok(FittedModel {
        model,
        kernel,
        iterations,
        residual,
        evicted_mass,
    })
}

/// Fit against a known kernel over the given pairs, e.g. the MDP itself
/// over every `(s, a)`.
pub fn fit_successor_model_on_kernel<K: TransitionKernel + ?Sized>(
    mdp: &TabularMdp,
    kernel: &K,
    pairs: &[(usize, usize)],
    policy: &TabularPolicy,
    config: &FitConfig,
) -> Result<(DescriptionTable, usize, f64)> {
    let (model, iterations, residual, _) = fit_on_kernel(mdp, kernel, pairs, policy, config)?;
    Ok((model, iterations, residual))
}

fn fit_on_kernel<K: TransitionKernel + ?Sized>(
    mdp: &TabularMdp,
    kernel: &K,
    pairs: &[(usize, usize)],
    policy: &TabularPolicy,
    config: &FitConfig,
) -> Result<(DescriptionTable, usize, f64, f64)> {
    if !(config.divergence_tol >= 0.0) {
        return Err(Error::Config("divergence tolerance must be nonnegative".into()));
    }
    let combinator = Combinator::new(mdp, config.horizon)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if pairs.is_empty() {
        return Err(Error::Config("no transitions to fit".into()));
    }

    let mut model = DescriptionTable::new(ns, na, config.horizon);
    for &(s, a) in pairs {
        model.set(s, a, DescriptionDistribution::point_mass(combinator.empty()));
    }

    let mut residual = f64::INFINITY;
    for iteration in 0..config.max_iterations {
        let mut next = DescriptionTable::new(ns, na, config.horizon);
        let mut divergence = 0.0;
        let mut evicted_mass: f64 = 0.0;
        for &(s, a) in pairs {
            let mut target = match config.mode {
                FitMode::Exact => exact_backup(&combinator, kernel, &model, policy, s, a)?,
                FitMode::Sampled { samples_per_pair, seed } => {
                    let stream = derive_seed(seed, (iteration * ns * na + s * na + a) as u64);
                    sampled_backup(
                        &combinator,
                        kernel,
                        &model,
                        policy,
                        s,
                        a,
                        samples_per_pair,
                        &mut seeded(stream),
                    )?
                }
            };
            evicted_mass = evicted_mass.max(target.cap_support(config.support_cap));
            divergence += target.kl_divergence(model.require(s, a)?);
            next.set(s, a, target);
        }
        residual = divergence / pairs.len() as f64;
        if residual <= config.divergence_tol {
            return Ok((model, iteration, residual, evicted_mass));
        }
        model = next;
    }
    Err(Error::NonConvergence {
        what: "successor model fit",
        iterations: config.max_iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::sample_transition;

    /// Deterministic chain 0 -> 1 -> 2 -> 3 (terminal), one action.
    fn chain() -> TabularMdp {
        let n = 4;
        let transition = (0..n)
            .map(|s| {
                let mut row = vec![0.0; n];
                row[(s + 1).min(n - 1)] = 1.0;
                vec![row]
            })
            .collect();
        TabularMdp::new(
            transition,
            vec![vec![0.1], vec![0.2], vec![0.3], vec![0.0]],
            vec![1.0],
            0.9,
            vec![1.0, 0.0, 0.0, 0.0],
            &[3],
        )
        .unwrap()
    }

    fn all_transitions(mdp: &TabularMdp) -> Vec<Transition> {
        let mut out = Vec::new();
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                for &(n, _) in mdp.successors(s, a) {
                    out.push(Transition {
                        state: s,
                        action: a,
                        reward: mdp.reward(s),
                        next_state: n,
                        done: mdp.is_terminal(n),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn deterministic_chain_point_mass_on_literal_future() {
        let mdp = chain();
        let policy = TabularPolicy::uniform(4, 1);
        let fit = fit_successor_model(&mdp, &policy, &all_transitions(&mdp), &FitConfig::exact(3)).unwrap();
        let d = fit.model.get(0, 0).unwrap();
        assert_eq!(d.len(), 1);
        let (desc, p) = d.iter().next().unwrap();
        assert_eq!(p, 1.0);
        let states: Vec<usize> = desc.steps().iter().map(|s| s.state).collect();
        assert_eq!(states, vec![1, 2, 3]);
        assert_eq!(desc.terminal_reward(), Some(0.3));
        assert!(fit.iterations <= 4);
    }

    #[test]
    fn horizon_one_is_one_step_pushforward() {
        let mdp = crate::mdp::random_mdp(&crate::mdp::RandomMdpSpec::new(5, 2, 3, 0.7, 3)).unwrap();
        let policy = crate::mdp::random_policy(5, 2, 4);
        let pairs: Vec<(usize, usize)> = (0..5).flat_map(|s| (0..2).map(move |a| (s, a))).collect();
        let (model, _, _) = fit_successor_model_on_kernel(&mdp, &mdp, &pairs, &policy, &FitConfig::exact(1)).unwrap();
        let b = Combinator::new(&mdp, 1).unwrap();
        for s in 0..5 {
            for a in 0..2 {
                let mut expect = DescriptionDistribution::default();
                for &(n, p) in mdp.successors(s, a) {
                    for (a2, &q) in policy.row(n).iter().enumerate() {
                        expect.accumulate(b.combine(mdp.reward(s), n, a2, &b.empty()), p * q);
                    }
                }
                expect.normalize().unwrap();
                assert!(model.get(s, a).unwrap().tv_distance(&expect) < 1e-12);
            }
        }
    }

    #[test]
    fn uncovered_successor_is_reported() {
        let mdp = chain();
        let policy = TabularPolicy::uniform(4, 1);
        let ts = vec![Transition { state: 0, action: 0, reward: 0.1, next_state: 1, done: false }];
        let err = fit_successor_model(&mdp, &policy, &ts, &FitConfig::exact(3)).unwrap_err();
        assert!(matches!(err, Error::MissingModelEntry { state: 1, action: 0 }));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let mdp = chain();
        let policy = TabularPolicy::uniform(4, 1);
        let mut cfg = FitConfig::exact(3);
        cfg.max_iterations = 1;
        let err = fit_successor_model(&mdp, &policy, &all_transitions(&mdp), &cfg).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { residual, .. } if residual > 0.0));
    }

    #[test]
    fn sampled_fit_on_chain_matches_exact() {
        let mdp = chain();
        let policy = TabularPolicy::uniform(4, 1);
        let mut rng = seeded(1);
        let ts: Vec<Transition> = (0..200)
            .map(|i| sample_transition(&mdp, &policy, i % 4, &mut rng).unwrap())
            .collect();
        let cfg = FitConfig {
            mode: FitMode::Sampled { samples_per_pair: 64, seed: 9 },
            ..FitConfig::exact(3)
        };
        let sampled = fit_successor_model(&mdp, &policy, &ts, &cfg).unwrap();
        let exact = fit_successor_model(&mdp, &policy, &ts, &FitConfig::exact(3)).unwrap();
        assert_eq!(sampled.model.max_tv_distance(&exact.model), 0.0);
    }
}
