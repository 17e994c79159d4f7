use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use nlac_core::engine::ReplayBuffer;
use nlac_core::rng::seeded;
use nlac_gateway::{ActionSchema, ChatContext, Gateway, NextObservation, ParsedEvaluation, Site};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{PairKind, Provenance, TrainingPair, TransitionRecord, PAIR_SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitConfig {
    /// Seed of the priority draws.
    pub seed: u64,
    /// Priority draws, with replacement.
    pub batch_size: usize,
    /// Fraction of draws that also get a policy pair, in `[0, 1]`.
    pub l2_ratio: f64,
    /// Critiques sampled per action.
    pub k: u32,
    /// Refinement rounds.
    pub m: u32,
    pub workers: usize,
    /// Largest tolerated fraction of failed jobs.
    pub max_failure_rate: f64,
}

impl Default for EmitConfig {
    fn default() -> Self {
        Self { seed: 0, batch_size: 1024, l2_ratio: 1.0, k: 1, m: 1, workers: 8, max_failure_rate: 0.1 }
    }
}

impl EmitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.l2_ratio) {
            return Err(Error::Config(format!("l2_ratio {} must lie in [0, 1]", self.l2_ratio)));
        }
        if self.k == 0 || self.m == 0 {
            return Err(Error::Config("k and m must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::Config(format!("max_failure_rate {} must lie in [0, 1]", self.max_failure_rate)));
        }
        Ok(())
    }
}

/// A transition whose pair could not be produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub episode_id: u64,
    pub step_index: u32,
    pub kind: PairKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    /// In draw order; a transition drawn twice contributes its pairs twice.
    pub pairs: Vec<TrainingPair>,
    pub skipped: Vec<Skip>,
    pub draws: usize,
    /// Distinct transitions drawn.
    pub transitions: usize,
}

/// Draw `i` also yields a policy pair when it crosses a multiple of `1 / ratio`.
fn wants_l2(i: usize, ratio: f64) -> bool {
    ((i + 1) as f64 * ratio).floor() > (i as f64 * ratio).floor()
}

/// Combines `k` critiques into one: the first that finds a flaw, else the first.
fn aggregate(critiques: Vec<ParsedEvaluation>) -> ParsedEvaluation {
    let first_flaw = critiques.iter().position(|c| !c.is_optimal()).unwrap_or(0);
    critiques.into_iter().nth(first_flaw).expect("k ≥ 1")
}

fn context(record: &TransitionRecord, gateway: &Gateway) -> Result<ChatContext> {
    Ok(ChatContext::from_messages(record.context.clone(), gateway.config().max_prompt_tokens)?)
}

fn site(record: &TransitionRecord) -> Site {
    Site::new(record.episode_id, record.step_index as u64)
}

/// Critic prompt at `(s_t, a_t)` → corrected Bellman-target evaluation.
pub fn critic_pair(record: &TransitionRecord, gateway: &Gateway) -> Result<TrainingPair> {
    let ctx = context(record, gateway)?;
    let next = NextObservation { text: record.next_observation.clone(), reward: record.reward, done: record.done };
    let target = gateway.generate_bellman_target(&ctx, &record.action, &next, site(record))?;
    Ok(TrainingPair {
        schema_version: PAIR_SCHEMA_VERSION,
        kind: PairKind::CriticL1,
        context: nlac_gateway::gateway::critic_messages(&ctx, &record.action),
        target_text: target.target_text(),
        provenance: Provenance {
            episode_id: record.episode_id,
            step_index: record.step_index,
            attempt: 0,
            correction_applied: target.correction.is_some(),
        },
    })
}

/// Policy prompt at `s_t` → refined version of a fresh policy sample.
pub fn policy_pair(
    record: &TransitionRecord,
    gateway: &Gateway,
    schema: &ActionSchema,
    k: u32,
    m: u32,
) -> Result<TrainingPair> {
    let ctx = context(record, gateway)?;
    let site = site(record);
    let mut current = gateway.generate_action(&ctx, schema, site)?.value;
    let mut transcript = Vec::new();
    for round in 0..m {
        let critiques = gateway.generate_critique(&ctx, &current, k, site)?;
        transcript.push((current.clone(), aggregate(critiques.into_iter().map(|g| g.value).collect())));
        let refined = gateway.generate_refined_action(&ctx, &transcript, schema, site)?;
        if refined.copied || round + 1 == m {
            return Ok(TrainingPair {
                schema_version: PAIR_SCHEMA_VERSION,
                kind: PairKind::PolicyL2,
                context: ctx.messages().to_vec(),
                target_text: refined.target_text(),
                provenance: Provenance {
                    episode_id: record.episode_id,
                    step_index: record.step_index,
                    attempt: round,
                    correction_applied: refined.correction.is_some(),
                },
            });
        }
        current = refined.action;
    }
    unreachable!("m ≥ 1 rounds always return")
}

type Job = (usize, PairKind);

/// Samples transitions by priority and builds their supervision pairs.
/// Each distinct transition is processed once; failed jobs are skipped and
/// reported, and the run fails only when they exceed the configured rate.
pub fn emit_training_pairs(
    buffer: &ReplayBuffer<TransitionRecord>,
    gateway: &Gateway,
    schema: &ActionSchema,
    config: &EmitConfig,
) -> Result<Emission> {
    config.validate()?;
    if buffer.is_empty() || config.batch_size == 0 {
        return Ok(Emission { pairs: Vec::new(), skipped: Vec::new(), draws: 0, transitions: 0 });
    }
    let draws = buffer.sample_indices(config.batch_size, &mut seeded(config.seed))?;
    let mut jobs: Vec<Job> = Vec::new();
    for (i, &d) in draws.iter().enumerate() {
        let mut add = |job: Job| {
            if !jobs.contains(&job) {
                jobs.push(job);
            }
        };
        add((d, PairKind::CriticL1));
        if wants_l2(i, config.l2_ratio) {
            add((d, PairKind::PolicyL2));
        }
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..config.workers.min(jobs.len()) {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            scope.spawn(move || loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(index, kind)) = jobs.get(j) else { break };
                let record = buffer.get(index).expect("drawn index is in the buffer");
                let result = match kind {
                    PairKind::CriticL1 => critic_pair(record, gateway),
                    PairKind::PolicyL2 => policy_pair(record, gateway, schema, config.k, config.m),
                }
                .and_then(|pair| match pair.check_target() {
                    Ok(()) => Ok(pair),
                    Err(e) => Err(Error::Invalid(format!("target does not re-parse: {e}"))),
                });
                if tx.send((j, result)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut done: BTreeMap<Job, TrainingPair> = BTreeMap::new();
    let mut results: Vec<(usize, Result<TrainingPair>)> = rx.into_iter().collect();
    results.sort_by_key(|(j, _)| *j);
    let mut skipped = Vec::new();
    for (j, result) in results {
        let (index, kind) = jobs[j];
        match result {
            Ok(pair) => {
                done.insert((index, kind), pair);
            }
            Err(e) => {
                let r = buffer.get(index).expect("drawn index is in the buffer");
                skipped.push(Skip { episode_id: r.episode_id, step_index: r.step_index, kind, reason: e.to_string() });
            }
        }
    }
    if skipped.len() as f64 > config.max_failure_rate * jobs.len() as f64 {
        return Err(Error::FailureRate { failed: skipped.len(), attempted: jobs.len(), max_rate: config.max_failure_rate });
    }
    let mut pairs = Vec::new();
    for (i, &d) in draws.iter().enumerate() {
        pairs.extend(done.get(&(d, PairKind::CriticL1)).cloned());
        if wants_l2(i, config.l2_ratio) {
            pairs.extend(done.get(&(d, PairKind::PolicyL2)).cloned());
        }
    }
    let transitions = draws.iter().collect::<std::collections::BTreeSet<_>>().len();
    Ok(Emission { pairs, skipped, draws: draws.len(), transitions })
}
