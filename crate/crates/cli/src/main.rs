use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlac_cli::commands::{self, Outcome};
use nlac_cli::config::{AgentKind, JudgeKind, RunConfig};
use nlac_cli::error::{CliError, Result, EXIT_ACCEPTANCE};
use nlac_cli::theory::{self, Suite};
use nlac_envs::EnvSpec;

#[derive(Parser)]
#[command(name = "nlac", version, about = "Language actor-critic: theory checks, rollouts, evaluation and supervision emission")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write metric records as JSON lines here.
    #[arg(long, global = true)]
    metrics: Option<PathBuf>,
    /// Answer chat requests from a recorded cassette.
    #[arg(long, global = true, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Call the endpoint and append every exchange to a cassette.
    #[arg(long, global = true)]
    record: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    env: Option<EnvKind>,
    /// Hidden 20 Questions object.
    #[arg(long, global = true)]
    hidden: Option<String>,
    #[arg(long, global = true)]
    max_turns: Option<u32>,
    /// Tool-use scenario id or path.
    #[arg(long, global = true)]
    scenario: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    TwentyQuestions,
    ToolUse,
}

#[derive(Subcommand)]
enum Command {
    /// Run the seeded tabular checks; exits 4 if any instance fails.
    VerifyTheory {
        /// Suites to run (default all).
        #[arg(long, value_parser = parse_suite)]
        suite: Vec<Suite>,
        /// Discounts, cycled over instances.
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
    },
    /// Play episodes and append their transitions to a log.
    Rollout {
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_enum)]
        agent: Option<AgentKind>,
        #[arg(long, value_enum)]
        judge: Option<JudgeKind>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        transitions: Option<PathBuf>,
        #[arg(long)]
        episodes_log: Option<PathBuf>,
    },
    /// Play episodes for each seed and print a per-seed table.
    Eval {
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_enum)]
        agent: Option<AgentKind>,
        #[arg(long, value_enum)]
        judge: Option<JudgeKind>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Sample transitions by priority and write critic and policy training pairs.
    Emit {
        #[arg(long)]
        transitions: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Priority updates applied before sampling.
        #[arg(long)]
        priorities: Option<PathBuf>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        l2_ratio: Option<f64>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse()
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_common(cfg: &mut RunConfig, c: &Common) -> Result<()> {
    set(&mut cfg.seed, c.seed);
    if c.replay.is_some() || c.record.is_some() {
        cfg.transport.replay = c.replay.clone();
        cfg.transport.record = c.record.clone();
    }
    match c.env {
        Some(EnvKind::TwentyQuestions) if !matches!(cfg.env, EnvSpec::TwentyQuestions { .. }) => {
            cfg.env = EnvSpec::TwentyQuestions { hidden: None, max_turns: nlac_envs::twenty_q::DEFAULT_MAX_TURNS };
        }
        Some(EnvKind::ToolUse) => {
            let scenario = c
                .scenario
                .clone()
                .ok_or_else(|| CliError::Config("--env tool-use needs --scenario".into()))?;
            cfg.env = EnvSpec::ToolUse { scenario };
        }
        _ => {}
    }
    match &mut cfg.env {
        EnvSpec::TwentyQuestions { hidden, max_turns } => {
            if c.hidden.is_some() {
                *hidden = c.hidden.clone();
            }
            set(max_turns, c.max_turns);
        }
        EnvSpec::ToolUse { scenario } => {
            set(scenario, c.scenario.clone());
        }
        EnvSpec::Math { .. } => {}
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(Outcome, bool)> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_common(&mut cfg, &cli.common)?;
    match &cli.command {
        Command::VerifyTheory { suite, gamma } => {
            cfg.theory.seed = cfg.seed;
            if !suite.is_empty() {
                cfg.theory.suites = suite.clone();
            }
            if !gamma.is_empty() {
                cfg.theory.discounts = gamma.clone();
            }
        }
        &Command::Rollout { episodes, agent, judge, workers, ref transitions, ref episodes_log } => {
            let r = &mut cfg.rollout;
            set(&mut r.episodes, episodes);
            set(&mut r.agent, agent);
            set(&mut r.judge, judge);
            set(&mut r.workers, workers);
            r.transitions = transitions.clone().or(r.transitions.take());
            r.episodes_log = episodes_log.clone().or(r.episodes_log.take());
        }
        &Command::Eval { ref seeds, episodes, agent, judge, workers } => {
            let e = &mut cfg.eval;
            if !seeds.is_empty() {
                e.seeds = seeds.clone();
            }
            set(&mut e.episodes, episodes);
            set(&mut e.agent, agent);
            set(&mut e.judge, judge);
            set(&mut e.workers, workers);
        }
        &Command::Emit { ref transitions, ref output, ref priorities, batch_size, l2_ratio, k, m, workers, alpha } => {
            let e = &mut cfg.emit;
            e.transitions = transitions.clone().or(e.transitions.take());
            e.output = output.clone().or(e.output.take());
            e.priorities = priorities.clone().or(e.priorities.take());
            set(&mut e.batch_size, batch_size);
            set(&mut e.l2_ratio, l2_ratio);
            set(&mut e.k, k);
            set(&mut e.m, m);
            set(&mut e.workers, workers);
            set(&mut e.alpha, alpha);
        }
    }
    cfg.validate()?;
    match cli.command {
        Command::VerifyTheory { .. } => {
            let report = theory::run(&cfg.theory)?;
            let metrics = report
                .to_jsonl()
                .lines()
                .map(|l| serde_json::from_str(l).expect("report line is JSON"))
                .collect();
            Ok((Outcome { summary: report.human(), metrics }, report.passed()))
        }
        Command::Rollout { .. } => Ok((commands::rollout(&cfg, None)?, true)),
        Command::Eval { .. } => Ok((commands::eval(&cfg, None)?, true)),
        Command::Emit { .. } => Ok((commands::emit(&cfg, None)?, true)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let metrics_path = cli.common.metrics.clone();
    let result = run(cli).and_then(|(outcome, passed)| {
        if let Some(p) = &metrics_path {
            std::fs::write(p, outcome.metrics_jsonl())?;
        }
        print!("{}", outcome.summary);
        Ok(passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: theory checks failed");
            ExitCode::from(EXIT_ACCEPTANCE as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
