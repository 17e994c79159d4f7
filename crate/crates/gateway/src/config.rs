use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_PROMPT_TOKENS: usize = 8192;
pub const DEFAULT_MAX_RESPONSE_TOKENS: u32 = 24576;

/// The prompt-driven roles one model plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Policy,
    Critic,
    Bootstrap,
    Target,
    Refine,
    Correct,
    Judge,
}

impl Behavior {
    pub const ALL: [Behavior; 7] = [
        Self::Policy,
        Self::Critic,
        Self::Bootstrap,
        Self::Target,
        Self::Refine,
        Self::Correct,
        Self::Judge,
    ];

    /// Sampling behaviors run at 1.0; parsing-critical ones are greedy.
    pub fn default_temperature(self) -> f64 {
        match self {
            Self::Policy | Self::Critic | Self::Bootstrap | Self::Target => 1.0,
            Self::Refine | Self::Correct | Self::Judge => 0.0,
        }
    }

    fn index(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Policy => "policy",
            Self::Critic => "critic",
            Self::Bootstrap => "bootstrap",
            Self::Target => "target",
            Self::Refine => "refine",
            Self::Correct => "correct",
            Self::Judge => "judge",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub backoff_multiplier: f64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff_ms: 500,
            backoff_multiplier: 2.0,
            max_backoff_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    /// Immediate retries, for stubs and tests.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            initial_backoff_ms: 0,
            ..Self::default()
        }
    }

    /// Delay before attempt `attempt + 1` (0-based `attempt`).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64 * self.backoff_multiplier.powi(attempt as i32);
        Duration::from_millis(ms.min(self.max_backoff_ms as f64) as u64)
    }
}

/// Model name and temperature for one behavior, overriding the endpoint's.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorOverride {
    pub model_name: Option<String>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub auth_token_env_var: Option<String>,
    /// When set, used by every behavior without its own override.
    pub temperature: Option<f64>,
    pub timeout_secs: u64,
    pub retry_policy: RetryPolicy,
    pub max_response_tokens: u32,
    pub max_prompt_tokens: usize,
    pub max_in_flight: usize,
    pub behaviors: BTreeMap<Behavior, BehaviorOverride>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model_name: "default".into(),
            auth_token_env_var: None,
            temperature: None,
            timeout_secs: 600,
            retry_policy: RetryPolicy::default(),
            max_response_tokens: DEFAULT_MAX_RESPONSE_TOKENS,
            max_prompt_tokens: DEFAULT_MAX_PROMPT_TOKENS,
            max_in_flight: 8,
            behaviors: BTreeMap::new(),
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.retry_policy.max_attempts < 1 {
            return Err(Error::Config("retry_policy.max_attempts must be at least 1".into()));
        }
        if !(self.retry_policy.backoff_multiplier >= 1.0) {
            return Err(Error::Config("retry_policy.backoff_multiplier must be ≥ 1".into()));
        }
        if self.max_in_flight < 1 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        if self.max_prompt_tokens == 0 || self.max_response_tokens == 0 {
            return Err(Error::Config("token limits must be positive".into()));
        }
        let temps = self
            .temperature
            .iter()
            .chain(self.behaviors.values().filter_map(|o| o.temperature.as_ref()));
        for &t in temps {
            if !(0.0..=2.0).contains(&t) {
                return Err(Error::Config(format!("temperature {t} outside [0, 2]")));
            }
        }
        Ok(())
    }

    pub fn model_for(&self, behavior: Behavior) -> &str {
        self.behaviors
            .get(&behavior)
            .and_then(|o| o.model_name.as_deref())
            .unwrap_or(&self.model_name)
    }

    pub fn temperature_for(&self, behavior: Behavior) -> f64 {
        self.behaviors
            .get(&behavior)
            .and_then(|o| o.temperature)
            .or(self.temperature)
            .unwrap_or_else(|| behavior.default_temperature())
    }
}

/// Where in a run a call happens; with the run seed it fixes the request seed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub episode: u64,
    pub step: u64,
}

impl Site {
    pub fn new(episode: u64, step: u64) -> Self {
        Self { episode, step }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Request seed for one attempt. Retries get fresh seeds, so a retried
/// sample is a new draw rather than a repeat of the malformed one.
pub fn request_seed(run_seed: u64, site: Site, behavior: Behavior, sample: u32, attempt: u32) -> u64 {
    [site.episode, site.step, behavior.index(), sample as u64, attempt as u64]
        .iter()
        .fold(splitmix(run_seed), |acc, &x| splitmix(acc ^ splitmix(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_precedence() {
        let mut cfg = EndpointConfig::default();
        assert_eq!(cfg.temperature_for(Behavior::Critic), 1.0);
        assert_eq!(cfg.temperature_for(Behavior::Refine), 0.0);
        cfg.temperature = Some(0.7);
        assert_eq!(cfg.temperature_for(Behavior::Refine), 0.7);
        cfg.behaviors.insert(
            Behavior::Target,
            BehaviorOverride { model_name: Some("frozen".into()), temperature: Some(0.3) },
        );
        assert_eq!(cfg.temperature_for(Behavior::Target), 0.3);
        assert_eq!(cfg.model_for(Behavior::Target), "frozen");
        assert_eq!(cfg.model_for(Behavior::Critic), "default");
    }

    #[test]
    fn zero_attempts_rejected() {
        let cfg = EndpointConfig { retry_policy: RetryPolicy::immediate(0), ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn seeds_differ_by_coordinate() {
        let base = request_seed(1, Site::new(0, 0), Behavior::Critic, 0, 0);
        assert_eq!(base, request_seed(1, Site::new(0, 0), Behavior::Critic, 0, 0));
        assert_ne!(base, request_seed(1, Site::new(0, 0), Behavior::Critic, 0, 1));
        assert_ne!(base, request_seed(1, Site::new(0, 0), Behavior::Critic, 1, 0));
        assert_ne!(base, request_seed(1, Site::new(0, 1), Behavior::Critic, 0, 0));
        assert_ne!(base, request_seed(1, Site::new(0, 0), Behavior::Target, 0, 0));
        assert_ne!(base, request_seed(2, Site::new(0, 0), Behavior::Critic, 0, 0));
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy { max_backoff_ms: 1500, ..RetryPolicy::default() };
        assert_eq!(p.backoff(0), Duration::from_millis(500));
        assert_eq!(p.backoff(1), Duration::from_millis(1000));
        assert_eq!(p.backoff(5), Duration::from_millis(1500));
    }
}
