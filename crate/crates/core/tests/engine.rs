mod common;

use nlac_core::engine::{
    compute_l1, compute_l2, distill, ema_update, l2_from_logits, l2_logit_gradient, refine,
    run_nlac, CriticMode, DistillMode, EmaState, NlacConfig, ReplayBuffer, RefinementScope,
};
use nlac_core::lang::{Combinator, Critic, DescriptionDistribution, SuccessorCritic};
use nlac_core::mdp::{
    dp_optimal_policy, dp_q_values, dp_successor_features, expected_return, gridworld,
    random_mdp, random_policy, RandomMdpSpec, TabularMdp, TabularPolicy,
};
use nlac_core::rng::seeded;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_passes(buffer: &ReplayBuffer<usize>, draws: usize, seed: u64) -> bool {
    let n = buffer.len();
    let mut counts = vec![0usize; n];
    for &r in buffer.priority_sample(draws, seed).unwrap() {
        counts[r] += 1;
    }
    // closed-form p_i^α / Σ p_j^α, computed here rather than by the buffer
    let weights: Vec<f64> = buffer.priorities().map(|p| p.powf(buffer.alpha())).collect();
    let total: f64 = weights.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(&weights)
        .map(|(&c, w)| {
            let e = draws as f64 * w / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((n - 1) as f64).unwrap();
    1.0 - dist.cdf(stat) > 0.01
}

#[test]
fn replay_chi_square() {
    for (k, alpha) in [0.0, 0.1, 1.0].into_iter().enumerate() {
        let mut b = ReplayBuffer::new(16, alpha).unwrap();
        for i in 0..6 {
            b.push(i, (i + 1) as f64).unwrap();
        }
        assert!(chi_square_passes(&b, 100_000, 11 + k as u64), "alpha {alpha}");
    }
}

#[test]
fn replay_proportional_frequencies() {
    let mut b = ReplayBuffer::new(2, 1.0).unwrap();
    b.push(0usize, 1.0).unwrap();
    b.push(1usize, 3.0).unwrap();
    let draws = b.priority_sample(100_000, 5).unwrap();
    let ones = draws.iter().filter(|&&&r| r == 1).count() as f64 / 1e5;
    assert!((ones - 0.75).abs() < 0.01);
}

#[test]
fn ema_closed_form() {
    let mut rng = seeded(3);
    let c: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t0: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let tau = 0.005;
    let mut state = EmaState::new(c.clone(), t0.clone(), tau).unwrap();
    for _ in 0..10_000 {
        state = ema_update(state).unwrap();
    }
    let decay = (1.0 - tau).powi(10_000);
    for i in 0..8 {
        assert!((state.target[i] - (c[i] + decay * (t0[i] - c[i]))).abs() <= 1e-12);
    }
}

fn random_pair(seed: u64) -> (DescriptionDistribution, DescriptionDistribution) {
    let g = gridworld(3, 3, (2, 2), 0.9).unwrap();
    let b = Combinator::new(&g.mdp, 1).unwrap();
    let mut rng = seeded(seed);
    let mut p = DescriptionDistribution::default();
    let mut q = DescriptionDistribution::default();
    for s in 0..9 {
        let d = b.combine(0.0, s, 0, &b.empty());
        if s < 6 {
            p.accumulate(d.clone(), rng.random_range(0.01..1.0));
        }
        q.accumulate(d, rng.random_range(0.01..1.0));
    }
    p.normalize().unwrap();
    q.normalize().unwrap();
    (p, q)
}

#[test]
fn l1_equals_direct_kl() {
    for seed in 0..100 {
        let (p, q) = random_pair(seed);
        let direct: f64 = p.iter().map(|(d, pi)| pi * (pi / q.prob(d)).ln()).sum();
        assert!((compute_l1(&p, &q, None).unwrap() - direct).abs() <= 1e-10);
    }
}

#[test]
fn l2_gradient_matches_finite_differences() {
    let mut rng = seeded(1);
    for _ in 0..50 {
        let logits: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let action = rng.random_range(0..4);
        let grad = l2_logit_gradient(&logits, action);
        let h = 1e-6;
        for i in 0..4 {
            let (mut up, mut down) = (logits.clone(), logits.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (l2_from_logits(&up, action) - l2_from_logits(&down, action)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6);
        }
    }
    let p = TabularPolicy::new(vec![vec![0.5, 0.5]]).unwrap();
    assert!((compute_l2(&p, 0, 0).unwrap().loss - 2f64.ln()).abs() < 1e-15);
}

/// State 0 chooses between a 0-reward state and a 1-reward state.
fn two_action_fixture() -> TabularMdp {
    TabularMdp::new(
        vec![
            vec![vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]],
            vec![vec![0.0, 0.0, 0.0, 1.0]; 2],
            vec![vec![0.0, 0.0, 0.0, 1.0]; 2],
            vec![vec![0.0, 0.0, 0.0, 1.0]; 2],
        ],
        vec![vec![0.0], vec![0.0], vec![1.0], vec![0.0]],
        vec![1.0],
        1.0 - 1e-9,
        vec![1.0, 0.0, 0.0, 0.0],
        &[3],
    )
    .unwrap()
}

#[test]
fn refine_two_action_fixture() {
    let mdp = two_action_fixture();
    let policy = TabularPolicy::uniform(4, 2);
    let q = dp_q_values(&mdp, &policy, 1e-12).unwrap();
    assert!(q.get(0, 0).abs() < 1e-12 && (q.get(0, 1) - 1.0).abs() < 1e-6);
    let psi = dp_successor_features(&mdp, &policy, 1e-12).unwrap();
    let critic = SuccessorCritic::new(&mdp, &policy, &psi);
    let t = refine(&critic, 0, 0, 1, 2).unwrap();
    assert_eq!(t.refined_action(), 1);
    let kept = refine(&critic, 0, 1, 1, 2).unwrap();
    assert_eq!(kept.attempts.len(), 1);
    assert_eq!(kept.refined_action(), 1);
}

#[test]
fn refine_with_full_budget_is_argmax() {
    for seed in 0..10 {
        let mdp = random_mdp(&RandomMdpSpec::new(8, 4, 3, 0.9, seed)).unwrap();
        let policy = random_policy(8, 4, seed + 1);
        let psi = dp_successor_features(&mdp, &policy, 1e-12).unwrap();
        let critic = SuccessorCritic::new(&mdp, &policy, &psi);
        let q = dp_q_values(&mdp, &policy, 1e-12).unwrap();
        for s in 0..7 {
            let best = q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for a in 0..4 {
                let t = refine(&critic, s, a, 4, 4).unwrap();
                assert!(q.get(s, t.refined_action()) >= best - 1e-6);
                assert!(t.is_monotone());
            }
        }
    }
}

#[test]
fn refine_argmax_invariant_under_rescaling() {
    for seed in 0..10 {
        let mdp = random_mdp(&RandomMdpSpec::new(6, 3, 3, 0.8, seed)).unwrap();
        let scaled = mdp
            .with_reward_weights(mdp.reward_weights().iter().map(|w| 3.5 * w).collect())
            .unwrap();
        let policy = random_policy(6, 3, seed);
        let psi = dp_successor_features(&mdp, &policy, 1e-12).unwrap();
        let a = SuccessorCritic::new(&mdp, &policy, &psi);
        let b = SuccessorCritic::new(&scaled, &policy, &psi);
        for s in 0..5 {
            for init in 0..3 {
                let ta = refine(&a, s, init, 1, 3).unwrap();
                let tb = refine(&b, s, init, 1, 3).unwrap();
                assert_eq!(ta.refined_action(), tb.refined_action());
                let ratio = tb.refined.critique.sentiment / ta.refined.critique.sentiment;
                if ta.refined.critique.sentiment.abs() > 1e-9 {
                    assert!((ratio - 3.5).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn distill_matches_empirical_frequencies() {
    let p = TabularPolicy::uniform(1, 3);
    let mut pairs = vec![(0, 0); 6];
    pairs.extend(vec![(0, 2); 4]);
    let d = distill(&p, &pairs, 1.0, 5_000).unwrap();
    assert!((d.prob(0, 0) - 0.6).abs() < 1e-3);
    assert!((d.prob(0, 2) - 0.4).abs() < 1e-3);
    assert!(d.prob(0, 1) < 1e-3);
}

fn optimal_return(mdp: &TabularMdp) -> (f64, nlac_core::mdp::QTable) {
    let (opt, q) = dp_optimal_policy(mdp, 1e-12).unwrap();
    (expected_return(mdp, &opt, 1e-12).unwrap(), q)
}

#[test]
fn exact_nlac_reaches_optimum() {
    let mut mdps: Vec<TabularMdp> = (0..10)
        .map(|seed| {
            let spec = RandomMdpSpec::new(6 + seed as usize % 7, 3, 4, 0.9, 500 + seed).with_branching(3);
            random_mdp(&spec).unwrap()
        })
        .collect();
    mdps.push(gridworld(4, 4, (3, 3), 0.9).unwrap().mdp);
    let cfg = NlacConfig { iterations: 15, ..NlacConfig::default() };
    for (i, mdp) in mdps.iter().enumerate() {
        let out = run_nlac(mdp, &cfg).unwrap();
        let (j_star, q_star) = optimal_return(mdp);
        let last = out.diagnostics.last().unwrap();
        assert!((last.expected_return - j_star).abs() <= 1e-3, "mdp {i}");
        for d in &out.diagnostics {
            assert!(d.expected_return >= d.return_before - 1e-6, "mdp {i} iteration {}", d.iteration);
            assert!(d.transcripts_monotone);
        }
        let q_final = dp_q_values(mdp, &out.policy, 1e-12).unwrap();
        let v_final = q_final.state_values(&out.policy);
        for s in 0..mdp.num_states() {
            let v_star = q_star.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!((v_final[s] - v_star).abs() <= 1e-6, "mdp {i} state {s}");
        }
    }
}

#[test]
fn nlac_improvement_is_monotone() {
    let mut checked = 0;
    let mut monotone = 0;
    for seed in 0..10 {
        let mdp = random_mdp(&RandomMdpSpec::new(8, 3, 4, 0.9, 900 + seed)).unwrap();
        let out = run_nlac(&mdp, &NlacConfig { iterations: 8, seed, ..NlacConfig::default() }).unwrap();
        for d in &out.diagnostics {
            checked += 1;
            monotone += usize::from(d.expected_return >= d.return_before - 1e-6);
        }
    }
    assert!(monotone as f64 >= 0.95 * checked as f64);
}

#[test]
fn sampled_and_gradient_modes_improve() {
    let g = gridworld(3, 3, (2, 2), 0.9).unwrap();
    let start = expected_return(&g.mdp, &TabularPolicy::uniform(10, 4), 1e-12).unwrap();
    let cfg = NlacConfig {
        iterations: 12,
        critic: CriticMode::Sampled,
        refinement: RefinementScope::Exhaustive,
        distill: DistillMode::Gradient,
        tau: 0.05,
        batch_size: 256,
        seed: 4,
        ..NlacConfig::default()
    };
    let out = run_nlac(&g.mdp, &cfg).unwrap();
    let last = out.diagnostics.last().unwrap();
    assert!(last.expected_return > start);
    assert!(out.diagnostics.iter().all(|d| d.mean_l1.is_finite() && d.mean_l2.is_finite()));
    let again = run_nlac(&g.mdp, &cfg).unwrap();
    assert_eq!(out.diagnostics, again.diagnostics);
}

#[test]
fn description_critic_mode_runs() {
    let g = gridworld(3, 2, (2, 1), 0.9).unwrap();
    let cfg = NlacConfig { iterations: 5, critic: CriticMode::Description, horizon: 4, ..NlacConfig::default() };
    let out = run_nlac(&g.mdp, &cfg).unwrap();
    let (j_star, _) = optimal_return(&g.mdp);
    assert!((out.diagnostics.last().unwrap().expected_return - j_star).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transcripts_never_decrease(seed in 0u64..5000, m in 1usize..4, budget in 1usize..4, init in 0usize..3) {
        let mdp = random_mdp(&RandomMdpSpec::new(5, 3, 2, 0.7, seed)).unwrap();
        let policy = random_policy(5, 3, seed + 1);
        let psi = dp_successor_features(&mdp, &policy, 1e-10).unwrap();
        let critic = SuccessorCritic::new(&mdp, &policy, &psi);
        let t = refine(&critic, seed as usize % 4, init, m, budget).unwrap();
        prop_assert!(t.is_monotone());
        prop_assert!(t.attempts.len() <= m);
        prop_assert!(critic.num_actions() == 3);
    }

    #[test]
    fn replay_probabilities_are_normalized_powers(
        priorities in proptest::collection::vec(0.01f64..10.0, 1..20),
        alpha in 0.0f64..2.0,
    ) {
        let mut b = ReplayBuffer::new(32, alpha).unwrap();
        for (i, &p) in priorities.iter().enumerate() {
            b.push(i, p).unwrap();
        }
        let probs = b.sampling_probs().unwrap();
        let total: f64 = priorities.iter().map(|p| p.powf(alpha)).sum();
        for (p, q) in probs.iter().zip(&priorities) {
            prop_assert!((p - q.powf(alpha) / total).abs() < 1e-12);
        }
    }
}
