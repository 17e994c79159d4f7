//! Run configuration: a TOML file whose values command-line flags override.

use std::path::{Path, PathBuf};

use nlac_envs::EnvSpec;
use nlac_gateway::EndpointConfig;
use nlac_pipeline::EmitConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::theory::TheoryConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Actions sampled from the policy prompt.
    #[default]
    Policy,
    /// Scripted 20 Questions bisection over the object table.
    Bisection,
    /// Random attribute questions, then a uniform guess.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    #[default]
    Scripted,
    Endpoint,
}

/// Where chat completions come from. Neither path set means live HTTP.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    /// Answer from a recorded cassette.
    pub replay: Option<PathBuf>,
    /// Call the endpoint and append every exchange to this cassette.
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub episodes: usize,
    pub agent: AgentKind,
    pub judge: JudgeKind,
    pub workers: usize,
    /// Transition log, appended to.
    pub transitions: Option<PathBuf>,
    /// Full episode logs, appended to.
    pub episodes_log: Option<PathBuf>,
    pub initial_priority: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            episodes: 1,
            agent: AgentKind::Policy,
            judge: JudgeKind::Scripted,
            workers: 1,
            transitions: None,
            episodes_log: None,
            initial_priority: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub agent: AgentKind,
    pub judge: JudgeKind,
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { seeds: vec![0, 1, 2], episodes: 10, agent: AgentKind::Policy, judge: JudgeKind::Scripted, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitSection {
    pub transitions: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// JSONL of `{episode_id, step_index, priority}` applied before sampling.
    pub priorities: Option<PathBuf>,
    pub alpha: f64,
    pub capacity: usize,
    pub batch_size: usize,
    pub l2_ratio: f64,
    pub k: u32,
    pub m: u32,
    pub workers: usize,
    pub max_failure_rate: f64,
}

impl Default for EmitSection {
    fn default() -> Self {
        let d = EmitConfig::default();
        Self {
            transitions: None,
            output: None,
            priorities: None,
            alpha: nlac_core::engine::DEFAULT_PRIORITY_ALPHA,
            capacity: 1_000_000,
            batch_size: d.batch_size,
            l2_ratio: d.l2_ratio,
            k: d.k,
            m: d.m,
            workers: d.workers,
            max_failure_rate: d.max_failure_rate,
        }
    }
}

impl EmitSection {
    pub fn emit_config(&self, seed: u64) -> EmitConfig {
        EmitConfig {
            seed,
            batch_size: self.batch_size,
            l2_ratio: self.l2_ratio,
            k: self.k,
            m: self.m,
            workers: self.workers,
            max_failure_rate: self.max_failure_rate,
        }
    }
}

fn default_env() -> EnvSpec {
    EnvSpec::TwentyQuestions { hidden: None, max_turns: nlac_envs::twenty_q::DEFAULT_MAX_TURNS }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub env: EnvSpec,
    pub endpoint: EndpointConfig,
    pub transport: TransportConfig,
    pub rollout: RolloutConfig,
    pub eval: EvalConfig,
    pub emit: EmitSection,
    pub theory: TheoryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            env: default_env(),
            endpoint: EndpointConfig::default(),
            transport: TransportConfig::default(),
            rollout: RolloutConfig::default(),
            eval: EvalConfig::default(),
            emit: EmitSection::default(),
            theory: TheoryConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.transport.replay.is_some() && self.transport.record.is_some() {
            return Err(CliError::Config("transport: replay and record are mutually exclusive".into()));
        }
        if let Some(p) = &self.transport.replay {
            require_file(p, "transport.replay")?;
        }
        if self.rollout.workers == 0 || self.eval.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if !(self.rollout.initial_priority.is_finite() && self.rollout.initial_priority >= 0.0) {
            return Err(CliError::Config("rollout.initial_priority must be finite and nonnegative".into()));
        }
        self.theory.validate()
    }
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what}: {} does not exist", path.display())))
    }
}
