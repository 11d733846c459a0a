//! Scenario files, agent loading, sweeps over DC and request counts, and
//! metric export for the SFC provisioning agents.

pub mod cli;
pub mod config;
pub mod export;
pub mod run;

pub use config::{parse_config, parse_str, AgentKind, ConfigError, ScenarioConfig};
pub use export::{export_metrics, read_jsonl, write_jsonl, ExportError};
pub use run::{cell_sim, load_agent, mean_std, run_sweep, CellResult, CheckpointLoadError, LoadedAgent, RunRecord};
