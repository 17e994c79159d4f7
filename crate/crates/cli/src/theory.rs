//! Seeded checks of the tabular results: successor-feature fixed point and
//! critic ranking, language successor model against enumeration, and
//! convergence of the tabular actor-critic to the optimal return.

use std::collections::BTreeMap;

use nlac_core::engine::{run_nlac, NlacConfig};
use nlac_core::lang::representation::{td_successor_features, TdConfig};
use nlac_core::lang::{
    fit_successor_model, fit_successor_model_on_kernel, language_bellman_backup, scalarize_g, BackupMode, Critic,
    FitConfig, SuccessorCritic,
};
use nlac_core::mdp::{
    dp_optimal_policy, dp_q_values, dp_successor_features, expected_return, gridworld, random_mdp, random_policy,
    sample_transition, RandomMdpSpec, TabularMdp, TabularPolicy, Transition,
};
use nlac_core::rng::seeded;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics, RankTieBreaker};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    FixedPoint,
    Distributional,
    Optimality,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::FixedPoint, Suite::Distributional, Suite::Optimality];

    pub fn name(self) -> &'static str {
        match self {
            Self::FixedPoint => "fixed_point",
            Self::Distributional => "distributional",
            Self::Optimality => "optimality",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?} (expected fixed_point, distributional or optimality)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub seed: u64,
    pub suites: Vec<Suite>,
    /// Discount of the `i`-th instance is `discounts[i % len]`.
    pub discounts: Vec<f64>,
    pub fixed_point_mdps: usize,
    pub feature_tol: f64,
    pub distributional_mdps: usize,
    pub horizon: usize,
    pub samples_per_pair: usize,
    pub tv_tol: f64,
    pub optimality_mdps: usize,
    pub iterations: usize,
    pub return_tol: f64,
    pub monotone_tol: f64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            suites: Suite::ALL.to_vec(),
            discounts: vec![0.5, 0.9],
            fixed_point_mdps: 20,
            feature_tol: 1e-6,
            distributional_mdps: 10,
            horizon: 4,
            samples_per_pair: 20_000,
            tv_tol: 0.05,
            optimality_mdps: 10,
            iterations: 20,
            return_tol: 1e-3,
            monotone_tol: 1e-6,
        }
    }
}

impl TheoryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(format!("theory: {m}")));
        if self.discounts.is_empty() {
            return bad("discounts must not be empty");
        }
        if let Some(g) = self.discounts.iter().find(|g| !(0.0..1.0).contains(*g)) {
            return bad(&format!("discount {g} is outside [0, 1)"));
        }
        if self.horizon == 0 || self.horizon > 4 {
            return bad("horizon must be between 1 and 4");
        }
        if self.samples_per_pair == 0 {
            return bad("samples_per_pair must be positive");
        }
        for (name, v) in [
            ("feature_tol", self.feature_tol),
            ("tv_tol", self.tv_tol),
            ("return_tol", self.return_tol),
            ("monotone_tol", self.monotone_tol),
        ] {
            if !(v >= 0.0) {
                return bad(&format!("{name} must be nonnegative"));
            }
        }
        Ok(())
    }

    fn discount(&self, i: usize) -> f64 {
        self.discounts[i % self.discounts.len()]
    }
}

/// One checked instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub instance: String,
    pub discount: f64,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub instances: usize,
    pub passed: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TheoryReport {
    pub checks: Vec<Check>,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summaries(&self) -> Vec<SuiteSummary> {
        let mut out: BTreeMap<Suite, SuiteSummary> = BTreeMap::new();
        for c in &self.checks {
            let e = out.entry(c.suite).or_insert(SuiteSummary { suite: c.suite, instances: 0, passed: 0 });
            e.instances += 1;
            e.passed += c.passed as usize;
        }
        out.into_values().collect()
    }

    /// One JSON line per check, then one per suite summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&serde_json::to_string(c).expect("check serializes"));
            out.push('\n');
        }
        for s in self.summaries() {
            out.push_str(&serde_json::to_string(&s).expect("summary serializes"));
            out.push('\n');
        }
        out
    }

    pub fn human(&self) -> String {
        let mut out = String::new();
        for s in self.summaries() {
            let verdict = if s.passed == s.instances { "PASS" } else { "FAIL" };
            out.push_str(&format!("{verdict} {:<15} {}/{} instances\n", s.suite.name(), s.passed, s.instances));
        }
        for c in self.checks.iter().filter(|c| !c.passed) {
            out.push_str(&format!("  failed {} {} γ={}: {:?}\n", c.suite.name(), c.instance, c.discount, c.metrics));
        }
        out
    }
}

fn all_pairs(mdp: &TabularMdp) -> Vec<(usize, usize)> {
    (0..mdp.num_states()).flat_map(|s| (0..mdp.num_actions()).map(move |a| (s, a))).collect()
}

fn ranks(x: &[f64]) -> Vec<f64> {
    Data::new(x.to_vec()).ranks(RankTieBreaker::Average)
}

/// Spearman rank correlation, average ranks for ties. Constant inputs
/// correlate perfectly only with each other.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    match (vx == 0.0, vy == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => cov / (vx * vy).sqrt(),
    }
}

fn check_fixed_point(cfg: &TheoryConfig, i: usize) -> Result<Check> {
    let seed = cfg.seed + i as u64;
    let gamma = cfg.discount(i);
    let ns = 5 + (i % 4) * 5;
    let na = 2 + i % 4;
    let d = 2 + i % 7;
    let mdp = random_mdp(&RandomMdpSpec::new(ns, na, d, gamma, seed))?;
    let policy = random_policy(ns, na, seed.wrapping_add(1000));
    let td = td_successor_features(&mdp, &policy, &TdConfig::default())?;
    let psi = dp_successor_features(&mdp, &policy, 1e-13)?;
    let q = dp_q_values(&mdp, &policy, 1e-13)?;
    let critic = SuccessorCritic::new(&mdp, &policy, &td.table);
    let mut sup: f64 = 0.0;
    let (mut g, mut qs) = (Vec::new(), Vec::new());
    for (s, a) in all_pairs(&mdp) {
        for (x, y) in td.table.get(s, a).iter().zip(psi.get(s, a)) {
            sup = sup.max((x - y).abs());
        }
        g.push(scalarize_g(&critic.critique(s, a)?));
        qs.push(q.get(s, a));
    }
    let rho = spearman(&g, &qs);
    Ok(Check {
        suite: Suite::FixedPoint,
        instance: format!("random seed={seed} S={ns} A={na} d={d}"),
        discount: gamma,
        passed: sup <= cfg.feature_tol && rho == 1.0,
        metrics: BTreeMap::from([
            ("sup_error".into(), sup),
            ("spearman".into(), rho),
            ("td_sweeps".into(), td.sweeps as f64),
        ]),
    })
}

/// Exact law of the `horizon`-step rollout record from `(s, a)`, by walking
/// every branch, keyed by the record's canonical text.
pub fn enumerate_rollouts(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    s: usize,
    a: usize,
    horizon: usize,
) -> BTreeMap<String, f64> {
    let fmt = |r: f64| format!("{:?}", if r == 0.0 { 0.0 } else { r });
    let mut out = BTreeMap::new();
    let mut stack = vec![(s, a, Vec::<String>::new(), 1.0, None::<f64>)];
    while let Some((state, action, steps, p, outcome)) = stack.pop() {
        if steps.len() == horizon || outcome.is_some() {
            let tail = outcome.map_or("open".to_string(), |r| format!("terminal r={}", fmt(r)));
            let key = format!("γ={:?} | {} | {}", mdp.discount(), steps.join(" ; "), tail);
            *out.entry(key).or_insert(0.0) += p;
            continue;
        }
        let reward = mdp.reward(state);
        for &(next, pt) in mdp.successors(state, action) {
            for (next_action, &pa) in policy.row(next).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                let mut steps = steps.clone();
                steps.push(format!("s{next} a{next_action} r={}", fmt(reward)));
                stack.push((next, next_action, steps, p * pt * pa, mdp.is_terminal(next).then_some(reward)));
            }
        }
    }
    out
}

fn tv(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    0.5 * keys.into_iter().map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

fn check_distributional(cfg: &TheoryConfig, i: usize) -> Result<Check> {
    let seed = cfg.seed + 100 + i as u64;
    let gamma = cfg.discount(i);
    let ns = 4 + i % 3;
    let na = 2;
    let mdp = random_mdp(&RandomMdpSpec::new(ns, na, 3, gamma, seed).with_branching(2))?;
    let policy = random_policy(ns, na, seed.wrapping_add(50));
    let pairs = all_pairs(&mdp);

    let mut rng = seeded(seed.wrapping_add(7));
    let mut transitions: Vec<Transition> = Vec::with_capacity(pairs.len() * cfg.samples_per_pair);
    for &(s, a) in &pairs {
        let fixed = TabularPolicy::deterministic(&vec![a; ns], na);
        for _ in 0..cfg.samples_per_pair {
            transitions.push(sample_transition(&mdp, &fixed, s, &mut rng)?);
        }
    }
    let fit_cfg = FitConfig::exact(cfg.horizon);
    let fit = fit_successor_model(&mdp, &policy, &transitions, &fit_cfg)?;
    let mut worst_tv: f64 = 0.0;
    for &(s, a) in &pairs {
        let oracle = enumerate_rollouts(&mdp, &policy, s, a, cfg.horizon);
        let got: BTreeMap<String, f64> = fit.model.require(s, a)?.iter().map(|(x, p)| (x.canonical(), p)).collect();
        worst_tv = worst_tv.max(tv(&oracle, &got));
    }

    let (model, _, _) = fit_successor_model_on_kernel(&mdp, &mdp, &pairs, &policy, &fit_cfg)?;
    let mut shift: f64 = 0.0;
    for &(s, a) in &pairs {
        let next = language_bellman_backup(&model, &mdp, &policy, s, a, BackupMode::Exact)?;
        shift = shift.max(next.tv_distance(model.require(s, a)?));
    }
    let shift_tol = 2.0 * fit_cfg.divergence_tol;
    Ok(Check {
        suite: Suite::Distributional,
        instance: format!("random seed={seed} S={ns} A={na} H={}", cfg.horizon),
        discount: gamma,
        passed: worst_tv <= cfg.tv_tol && shift <= shift_tol,
        metrics: BTreeMap::from([
            ("max_tv".into(), worst_tv),
            ("fixed_point_shift".into(), shift),
            ("fit_iterations".into(), fit.iterations as f64),
        ]),
    })
}

fn check_optimality(cfg: &TheoryConfig, instance: String, mdp: &TabularMdp, seed: u64) -> Result<Check> {
    let (optimal, _) = dp_optimal_policy(mdp, 1e-12)?;
    let j_star = expected_return(mdp, &optimal, 1e-12)?;
    let out = run_nlac(mdp, &NlacConfig { iterations: cfg.iterations, seed, ..NlacConfig::default() })?;
    let j = expected_return(mdp, &out.policy, 1e-12)?;
    let mut worst_drop: f64 = 0.0;
    let mut previous = None;
    for d in &out.diagnostics {
        worst_drop = worst_drop.max(d.return_before - d.expected_return);
        if let Some(p) = previous {
            worst_drop = worst_drop.max(p - d.expected_return);
        }
        previous = Some(d.expected_return);
    }
    let gap = (j - j_star).abs();
    Ok(Check {
        suite: Suite::Optimality,
        instance,
        discount: mdp.discount(),
        passed: gap <= cfg.return_tol && worst_drop <= cfg.monotone_tol,
        metrics: BTreeMap::from([
            ("return".into(), j),
            ("optimal_return".into(), j_star),
            ("gap".into(), gap),
            ("worst_drop".into(), worst_drop),
        ]),
    })
}

/// Runs the configured suites in a fixed order.
pub fn run(cfg: &TheoryConfig) -> Result<TheoryReport> {
    cfg.validate()?;
    let mut suites = cfg.suites.clone();
    suites.sort();
    suites.dedup();
    let mut checks = Vec::new();
    for suite in suites {
        match suite {
            Suite::FixedPoint => {
                for i in 0..cfg.fixed_point_mdps {
                    checks.push(check_fixed_point(cfg, i)?);
                }
            }
            Suite::Distributional => {
                for i in 0..cfg.distributional_mdps {
                    checks.push(check_distributional(cfg, i)?);
                }
            }
            Suite::Optimality => {
                for i in 0..cfg.optimality_mdps {
                    let seed = cfg.seed + 500 + i as u64;
                    let ns = 6 + i % 7;
                    let spec = RandomMdpSpec::new(ns, 3, 4, cfg.discount(i), seed).with_branching(3);
                    let mdp = random_mdp(&spec)?;
                    checks.push(check_optimality(cfg, format!("random seed={seed} S={ns} A=3"), &mdp, seed)?);
                }
                let gamma = cfg.discount(cfg.optimality_mdps);
                let grid = gridworld(4, 4, (3, 3), gamma)?;
                checks.push(check_optimality(cfg, "gridworld 4x4".into(), &grid.mdp, cfg.seed)?);
            }
        }
    }
    Ok(TheoryReport { checks })
}
