//! The `rollout`, `eval` and `emit` commands.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nlac_core::engine::ReplayBuffer;
use nlac_core::rng::derive_seed;
use nlac_envs::{
    env_reset, run_episode, Agent, BisectionAgent, EnvSpec, EpisodeLog, GatewayAgent, Judge, ObjectTable,
    RandomGuesser,
};
use nlac_gateway::{Gateway, HttpTransport, RecordingTransport, ReplayTransport, Transport};
use nlac_pipeline::{
    apply_priorities, emit_training_pairs, load_priority_updates, load_transitions, write_jsonl, TransitionLog,
    TransitionRecord,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{require_file, AgentKind, JudgeKind, RunConfig};
use crate::error::{CliError, Result};

/// Stream tag separating the emission gateway's sampling seeds from the
/// rollout gateway's.
const EMIT_STREAM: u64 = 0x656d6974;

/// What a command reports: text for a person and metric records for a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub metrics: Vec<Value>,
}

impl Outcome {
    pub fn metrics_jsonl(&self) -> String {
        self.metrics.iter().map(|m| format!("{m}\n")).collect()
    }
}

pub fn transport(cfg: &RunConfig) -> Result<Arc<dyn Transport>> {
    Ok(match (&cfg.transport.replay, &cfg.transport.record) {
        (Some(_), Some(_)) => return Err(CliError::Config("replay and record are mutually exclusive".into())),
        (Some(path), None) => Arc::new(ReplayTransport::from_path(path)?),
        (None, Some(path)) => Arc::new(RecordingTransport::new(HttpTransport::new(&cfg.endpoint)?, path)?),
        (None, None) => Arc::new(HttpTransport::new(&cfg.endpoint)?),
    })
}

fn gateway(cfg: &RunConfig, transport: &Arc<dyn Transport>, run_seed: u64) -> Result<Arc<Gateway>> {
    Ok(Arc::new(Gateway::new(transport.clone(), cfg.endpoint.clone(), run_seed)?))
}

/// Everything needed to play one episode.
struct Plan<'a> {
    spec: &'a EnvSpec,
    agent: AgentKind,
    judge: JudgeKind,
    gateway: Option<Arc<Gateway>>,
    table: Arc<ObjectTable>,
    max_prompt_tokens: usize,
}

impl Plan<'_> {
    fn play(&self, episode_id: u64, env_seed: u64) -> Result<EpisodeLog> {
        let need = |what: &str| {
            self.gateway.clone().ok_or_else(|| CliError::Config(format!("{what} needs an endpoint")))
        };
        let max_turns = match self.spec {
            EnvSpec::TwentyQuestions { max_turns, .. } => Some(*max_turns),
            _ => None,
        };
        let mut agent: Box<dyn Agent> = match (self.agent, max_turns) {
            (AgentKind::Policy, _) => Box::new(GatewayAgent::new(need("the policy agent")?)),
            (AgentKind::Bisection, Some(_)) => Box::new(BisectionAgent::new(self.table.clone())),
            (AgentKind::Random, Some(t)) => {
                Box::new(RandomGuesser::new(self.table.clone(), t, derive_seed(env_seed, 1)))
            }
            (kind, None) => {
                return Err(CliError::Config(format!("agent {kind:?} only plays twenty_questions")));
            }
        };
        let judge = match self.judge {
            JudgeKind::Scripted => Judge::Scripted,
            JudgeKind::Endpoint => Judge::Llm { gateway: need("the endpoint judge")?, episode: episode_id },
        };
        Ok(run_episode(self.spec, env_seed, episode_id, agent.as_mut(), judge, self.max_prompt_tokens)?)
    }
}

fn plan<'a>(
    cfg: &'a RunConfig,
    agent: AgentKind,
    judge: JudgeKind,
    transport: &Option<Arc<dyn Transport>>,
    run_seed: u64,
) -> Result<Plan<'a>> {
    let gateway = match transport {
        Some(t) => Some(gateway(cfg, t, run_seed)?),
        None if agent == AgentKind::Policy || judge == JudgeKind::Endpoint => {
            Some(gateway(cfg, &self::transport(cfg)?, run_seed)?)
        }
        None => None,
    };
    Ok(Plan {
        spec: &cfg.env,
        agent,
        judge,
        gateway,
        table: Arc::new(ObjectTable::bundled()),
        max_prompt_tokens: cfg.endpoint.max_prompt_tokens,
    })
}

/// Plays `(episode_id, env_seed)` jobs on `workers` threads, results in job order.
fn play_all(plan: &Plan<'_>, jobs: &[(u64, u64)], workers: usize) -> Result<Vec<EpisodeLog>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<EpisodeLog>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(id, seed)) = jobs.get(j) else { break };
                let r = plan.play(id, seed);
                results.lock().expect("results lock")[j] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

#[derive(Serialize)]
struct EpisodeMetric {
    episode_id: u64,
    seed: u64,
    reward: f64,
    turns: usize,
    won: bool,
    violation: bool,
}

impl From<&EpisodeLog> for EpisodeMetric {
    fn from(l: &EpisodeLog) -> Self {
        Self {
            episode_id: l.episode_id,
            seed: l.seed,
            reward: l.reward,
            turns: l.steps.len(),
            won: l.won(),
            violation: l.violation,
        }
    }
}

fn append_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    for r in records {
        let mut line = serde_json::to_string(r)?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Plays episodes and appends their transitions to the transition log.
/// Episode ids continue after the largest already in the log.
pub fn rollout(cfg: &RunConfig, transport: Option<Arc<dyn Transport>>) -> Result<Outcome> {
    let r = &cfg.rollout;
    let first_id = match &r.transitions {
        Some(p) if p.exists() => {
            load_transitions(p)?.records.iter().map(|t| t.episode_id + 1).max().unwrap_or(0)
        }
        _ => 0,
    };
    let mut log = r.transitions.as_deref().map(TransitionLog::open).transpose()?;
    let plan = plan(cfg, r.agent, r.judge, &transport, cfg.seed)?;
    let jobs: Vec<(u64, u64)> = (0..r.episodes as u64)
        .map(|i| (first_id + i, derive_seed(cfg.seed, first_id + i)))
        .collect();
    let episodes = play_all(&plan, &jobs, r.workers)?;

    let mut transitions = 0;
    if let Some(log) = log.as_mut() {
        for e in &episodes {
            for t in TransitionRecord::from_episode(e, r.initial_priority) {
                log.persist(&t)?;
                transitions += 1;
            }
        }
    }
    if let Some(p) = &r.episodes_log {
        append_jsonl(p, &episodes)?;
    }
    let mut metrics: Vec<Value> =
        episodes.iter().map(|e| serde_json::to_value(EpisodeMetric::from(e))).collect::<Result<_, _>>()?;
    let n = episodes.len();
    let mean = |f: &dyn Fn(&EpisodeLog) -> f64| if n == 0 { 0.0 } else { episodes.iter().map(f).sum::<f64>() / n as f64 };
    let mean_reward = mean(&|e| e.reward);
    let win_rate = mean(&|e| e.won() as u8 as f64);
    metrics.push(json!({"episodes": n, "mean_reward": mean_reward, "win_rate": win_rate, "transitions": transitions}));
    let mut summary = format!("{n} episode(s), mean reward {mean_reward:.4}, win rate {win_rate:.4}\n");
    if let Some(p) = &r.transitions {
        summary.push_str(&format!("{transitions} transition(s) appended to {}\n", p.display()));
    }
    Ok(Outcome { summary, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRow {
    pub seed: u64,
    pub episodes: usize,
    pub mean_reward: f64,
    pub win_rate: f64,
    pub mean_turns: f64,
}

/// Plays `episodes` episodes per seed and tabulates mean reward, win rate
/// and episode length.
pub fn eval(cfg: &RunConfig, transport: Option<Arc<dyn Transport>>) -> Result<Outcome> {
    let e = &cfg.eval;
    let mut rows = Vec::new();
    if e.episodes > 0 {
        for &seed in &e.seeds {
            let plan = plan(cfg, e.agent, e.judge, &transport, seed)?;
            let jobs: Vec<(u64, u64)> = (0..e.episodes as u64).map(|j| (j, derive_seed(seed, j))).collect();
            let logs = play_all(&plan, &jobs, e.workers)?;
            let n = logs.len() as f64;
            rows.push(SeedRow {
                seed,
                episodes: logs.len(),
                mean_reward: logs.iter().map(|l| l.reward).sum::<f64>() / n,
                win_rate: logs.iter().filter(|l| l.won()).count() as f64 / n,
                mean_turns: logs.iter().map(|l| l.steps.len() as f64).sum::<f64>() / n,
            });
        }
    }
    let mut summary = format!("{:>20}  {:>8}  {:>11}  {:>8}  {:>10}\n", "seed", "episodes", "mean_reward", "win_rate", "mean_turns");
    for r in &rows {
        summary.push_str(&format!(
            "{:>20}  {:>8}  {:>11.4}  {:>8.4}  {:>10.2}\n",
            r.seed, r.episodes, r.mean_reward, r.win_rate, r.mean_turns
        ));
    }
    let mut metrics: Vec<Value> = rows.iter().map(serde_json::to_value).collect::<Result<_, _>>()?;
    if !rows.is_empty() {
        let k = rows.len() as f64;
        let avg = |f: fn(&SeedRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
        let (reward, win, turns) = (avg(|r| r.mean_reward), avg(|r| r.win_rate), avg(|r| r.mean_turns));
        summary.push_str(&format!("{:>20}  {:>8}  {reward:>11.4}  {win:>8.4}  {turns:>10.2}\n", "mean", e.episodes));
        metrics.push(json!({"seed": "mean", "episodes": e.episodes, "mean_reward": reward, "win_rate": win, "mean_turns": turns}));
    } else {
        summary.push_str("(no episodes)\n");
    }
    Ok(Outcome { summary, metrics })
}

/// Samples the transition log by priority and writes supervision pairs.
pub fn emit(cfg: &RunConfig, transport: Option<Arc<dyn Transport>>) -> Result<Outcome> {
    let e = &cfg.emit;
    let input = e.transitions.as_deref().ok_or_else(|| CliError::Config("emit.transitions is not set".into()))?;
    let output = e.output.as_deref().ok_or_else(|| CliError::Config("emit.output is not set".into()))?;
    require_file(input, "emit.transitions")?;
    let mut loaded = load_transitions(input)?;
    if let Some(p) = &e.priorities {
        require_file(p, "emit.priorities")?;
        apply_priorities(&mut loaded.records, &load_priority_updates(p)?)?;
    }
    let mut buffer = ReplayBuffer::new(e.capacity, e.alpha).map_err(|err| CliError::Config(err.to_string()))?;
    for r in loaded.records {
        let p = r.priority;
        buffer.push(r, p)?;
    }
    let schema = env_reset(&cfg.env, 0)?.schema().clone();
    let transport = match transport {
        Some(t) => t,
        None => self::transport(cfg)?,
    };
    let gw = gateway(cfg, &transport, derive_seed(cfg.seed, EMIT_STREAM))?;
    let emission = emit_training_pairs(&buffer, &gw, &schema, &e.emit_config(cfg.seed))?;
    write_jsonl(output, &emission.pairs)?;
    for s in &emission.skipped {
        eprintln!("skipped episode {} step {} {:?}: {}", s.episode_id, s.step_index, s.kind, s.reason);
    }
    let summary = format!(
        "{} pair(s) from {} draw(s) over {} transition(s), {} skipped, {} truncated line(s) ignored; wrote {}\n",
        emission.pairs.len(),
        emission.draws,
        emission.transitions,
        emission.skipped.len(),
        loaded.skipped,
        output.display()
    );
    let metrics = vec![json!({
        "pairs": emission.pairs.len(),
        "draws": emission.draws,
        "transitions": emission.transitions,
        "skipped": emission.skipped.len(),
        "truncated_lines": loaded.skipped,
    })];
    Ok(Outcome { summary, metrics })
}
