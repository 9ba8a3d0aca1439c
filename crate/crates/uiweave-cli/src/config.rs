//! Run configuration assembled in three layers: built-in defaults, an
//! optional key-value config file, then command-line flags. Everything is
//! validated before a command touches the filesystem or the network.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use uiweave::explorer::ExploreBudget;
use uiweave::metrics::OverallWeights;
use uiweave::validator::DEFAULT_ROUND_CAP;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("bad value for {key}: {value:?} ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendChoice {
    /// Offline page simulator.
    Sim,
    /// Live browser over its websocket control endpoint.
    Browser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PolicyChoice {
    /// Deterministic DOM-reading policy; no network.
    Oracle,
    /// Remote vision-language model behind a chat endpoint.
    Vlm,
    /// Replays the transcripts of a previous run.
    Replay,
}

/// Everything a command needs to run. The API key itself never appears
/// here, only the name of the environment variable holding it.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backend: BackendChoice,
    pub policy: PolicyChoice,
    /// Chat endpoint for the vlm policy.
    pub endpoint: Option<String>,
    /// Websocket endpoint for the browser backend.
    pub browser_endpoint: Option<String>,
    pub model: String,
    pub api_key_env: Option<String>,
    /// Run directory whose transcripts the replay policy consumes.
    pub replay_dir: Option<PathBuf>,
    pub budget: ExploreBudget,
    pub round_cap: usize,
    pub weights: OverallWeights,
    /// Output path; commands fall back to their own defaults when unset.
    pub out: Option<PathBuf>,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendChoice::Sim,
            policy: PolicyChoice::Oracle,
            endpoint: None,
            browser_endpoint: None,
            model: "ui-explorer".to_string(),
            api_key_env: None,
            replay_dir: None,
            budget: ExploreBudget::default(),
            round_cap: DEFAULT_ROUND_CAP,
            weights: OverallWeights::default(),
            out: None,
            parallel: true,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: "not a number".to_string(),
    })
}

impl RunConfig {
    /// Applies `key = value` lines over the current values. `#` starts a
    /// comment; blank lines are ignored; unknown keys are errors.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let body = fs::read_to_string(path)?;
        for (index, raw) in body.lines().enumerate() {
            let line = index + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let (key, value) = text.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: text.to_string(),
            })?;
            self.set(key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        match key {
            "backend" => {
                self.backend = match value {
                    "sim" => BackendChoice::Sim,
                    "browser" => BackendChoice::Browser,
                    _ => return Err(bad("expected sim or browser")),
                }
            }
            "policy" => {
                self.policy = match value {
                    "oracle" => PolicyChoice::Oracle,
                    "vlm" => PolicyChoice::Vlm,
                    "replay" => PolicyChoice::Replay,
                    _ => return Err(bad("expected oracle, vlm, or replay")),
                }
            }
            "endpoint" => self.endpoint = Some(value.to_string()),
            "browser-endpoint" => self.browser_endpoint = Some(value.to_string()),
            "model" => self.model = value.to_string(),
            "api-key-env" => self.api_key_env = Some(value.to_string()),
            "replay-dir" => self.replay_dir = Some(PathBuf::from(value)),
            "budget-depth" => self.budget.max_depth = parse_num(key, value)?,
            "budget-candidates" => self.budget.max_candidates_per_state = parse_num(key, value)?,
            "budget-actions" => self.budget.max_total_actions = parse_num(key, value)?,
            "budget-mix" => self.budget.strategy_mix = parse_num(key, value)?,
            "round-cap" => self.round_cap = parse_num(key, value)?,
            "weight-completeness" => self.weights.completeness = parse_num(key, value)?,
            "weight-correctness" => self.weights.correctness = parse_num(key, value)?,
            "weight-dedup" => self.weights.dedup = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "parallel" => {
                self.parallel = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad("expected true or false")),
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.budget
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.round_cap < 1 {
            return Err(ConfigError::Invalid(
                "round-cap must be at least 1".to_string(),
            ));
        }
        let weights = [
            self.weights.completeness,
            self.weights.correctness,
            self.weights.dedup,
        ];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ConfigError::Invalid(
                "weights must be finite and non-negative".to_string(),
            ));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(ConfigError::Invalid(
                "weights must not all be zero".to_string(),
            ));
        }
        if self.policy == PolicyChoice::Vlm && self.endpoint.is_none() {
            return Err(ConfigError::Invalid(
                "the vlm policy needs --endpoint".to_string(),
            ));
        }
        if self.policy == PolicyChoice::Replay && self.replay_dir.is_none() {
            return Err(ConfigError::Invalid(
                "the replay policy needs --replay-dir".to_string(),
            ));
        }
        if self.backend == BackendChoice::Browser && self.browser_endpoint.is_none() {
            return Err(ConfigError::Invalid(
                "the browser backend needs --browser-endpoint".to_string(),
            ));
        }
        Ok(())
    }
}
