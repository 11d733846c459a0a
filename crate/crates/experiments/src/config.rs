//! Scenario files.
//!
//! A scenario is a TOML document. Every key is optional; unknown keys are
//! rejected. Relative paths are resolved against the file's directory.
//!
//! ```toml
//! agent = "genai-drl"          # heuristic | drl | genai-drl
//! output_dir = "runs/demo"
//!
//! [sim]                        # simulator settings
//! dc_count = 4
//! request_count_multiplier = 3
//!
//! [heuristic]
//! extended = false             # reclaim idle instances, skip blocked requests
//!
//! [evaluation]
//! masked = false               # restrict the greedy DQN to valid actions
//!
//! [checkpoints]                # default: <output_dir>/{dqn,vae,value}.ckpt, dataset.bin
//! dqn = "runs/demo/dqn.ckpt"
//!
//! [sweep]
//! agents = ["heuristic", "drl", "genai-drl"]
//! dc_counts = [2, 4, 6, 8]
//! request_counts = [1, 2, 3, 4, 5]
//! seeds = [0, 1, 2]
//! workers = 0                  # 0: one per core
//!
//! [training]
//! dqn_blocks = 12
//! dataset_rows = 5000
//! dataset_max_episodes = 2000
//!
//! [dqn]                        # network and schedule
//! [vae]                        # VAE and value network
//! [value_label]                # weights of the DC value label
//! ```

use serde::{Deserialize, Serialize};
use sfc_agents::{DqnConfig, VaeConfig, ValueLabelWeights};
use sfc_core::{SimConfig, SimError};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Heuristic,
    Drl,
    GenaiDrl,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Heuristic, AgentKind::Drl, AgentKind::GenaiDrl];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Heuristic => "heuristic",
            AgentKind::Drl => "drl",
            AgentKind::GenaiDrl => "genai-drl",
        }
    }

    pub fn needs_dqn(self) -> bool {
        self != AgentKind::Heuristic
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    pub extended: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub masked: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckpointPaths {
    pub dqn: Option<PathBuf>,
    pub vae: Option<PathBuf>,
    pub value: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub agents: Vec<AgentKind>,
    pub dc_counts: Vec<usize>,
    pub request_counts: Vec<u32>,
    pub seeds: Vec<u64>,
    pub workers: usize,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            agents: vec![AgentKind::Heuristic],
            dc_counts: vec![2, 4, 6, 8],
            request_counts: vec![1, 2, 3, 4, 5],
            seeds: vec![0],
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub dqn_blocks: usize,
    pub dataset_rows: usize,
    pub dataset_max_episodes: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            dqn_blocks: 12,
            dataset_rows: 5000,
            dataset_max_episodes: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub agent: AgentKind,
    pub output_dir: PathBuf,
    pub sim: SimConfig,
    pub heuristic: HeuristicConfig,
    pub evaluation: EvaluationConfig,
    pub checkpoints: CheckpointPaths,
    pub sweep: SweepAxes,
    pub training: TrainingConfig,
    pub dqn: DqnConfig,
    pub vae: VaeConfig,
    pub value_label: ValueLabelWeights,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::Heuristic,
            output_dir: PathBuf::from("results"),
            sim: SimConfig::default(),
            heuristic: HeuristicConfig::default(),
            evaluation: EvaluationConfig::default(),
            checkpoints: CheckpointPaths::default(),
            sweep: SweepAxes::default(),
            training: TrainingConfig::default(),
            dqn: DqnConfig::default(),
            vae: VaeConfig::default(),
            value_label: ValueLabelWeights::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}parse error: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Reads, parses and validates a scenario file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    cfg.resolve_paths(base);
    Ok(cfg)
}

/// Parses and validates scenario text; paths are left as written.
pub fn parse_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim.validate().map_err(|e| match e {
            SimError::InvalidConfig { field, reason } => invalid(format!("sim.{field}"), reason),
        })?;
        self.dqn.validate().map_err(|e| invalid("dqn", e.to_string()))?;
        self.vae.validate().map_err(|e| invalid("vae", e.to_string()))?;
        let s = &self.sweep;
        if s.seeds.is_empty() {
            return Err(invalid("sweep.seeds", "must not be empty"));
        }
        if s.agents.is_empty() {
            return Err(invalid("sweep.agents", "must not be empty"));
        }
        if s.dc_counts.is_empty() || s.dc_counts.iter().any(|&n| n < 2) {
            return Err(invalid("sweep.dc_counts", "must be non-empty, each at least 2"));
        }
        if s.request_counts.is_empty() || s.request_counts.iter().any(|n| !(1..=5).contains(n)) {
            return Err(invalid("sweep.request_counts", "must be non-empty, each in 1..=5"));
        }
        if self.training.dataset_rows == 0 {
            return Err(invalid("training.dataset_rows", "must be positive"));
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        let c = &mut self.checkpoints;
        for p in [&mut c.dqn, &mut c.vae, &mut c.value, &mut c.dataset].into_iter().flatten() {
            join(p);
        }
    }

    pub fn dqn_path(&self) -> PathBuf {
        self.checkpoints.dqn.clone().unwrap_or_else(|| self.output_dir.join("dqn.ckpt"))
    }

    pub fn vae_path(&self) -> PathBuf {
        self.checkpoints.vae.clone().unwrap_or_else(|| self.output_dir.join("vae.ckpt"))
    }

    pub fn value_path(&self) -> PathBuf {
        self.checkpoints.value.clone().unwrap_or_else(|| self.output_dir.join("value.ckpt"))
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.checkpoints.dataset.clone().unwrap_or_else(|| self.output_dir.join("dataset.bin"))
    }

    /// Checkpoints an agent loads, in load order.
    pub fn checkpoints_for(&self, agent: AgentKind) -> Vec<PathBuf> {
        match agent {
            AgentKind::Heuristic => vec![],
            AgentKind::Drl => vec![self.dqn_path()],
            AgentKind::GenaiDrl => vec![self.dqn_path(), self.vae_path(), self.value_path()],
        }
    }
}
