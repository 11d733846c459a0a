//! Loading agents and running episodes and sweeps.

use crate::config::{AgentKind, ScenarioConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sfc_agents::{AgentError, DqnAgent, DqnNetwork, GenAiSelector, Vae, ValueNetwork};
use sfc_core::{run_episode, Env, Heuristic, NoHook, PerKind, Pipeline, Policy, RandomDc, RunMetrics, SimConfig};
use std::path::PathBuf;

/// Mixed into the episode seed for the DRL agent's random DC choice.
const DC_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointLoadError {
    #[error("checkpoint {0} does not exist")]
    Missing(PathBuf),
    #[error("cannot load {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: AgentError,
    },
}

/// An agent ready to run episodes; cheap to clone per episode.
#[derive(Debug, Clone)]
pub enum LoadedAgent {
    Heuristic { extended: bool },
    Drl { dqn: DqnNetwork, masked: bool, count_cap: f64 },
    GenaiDrl { dqn: DqnNetwork, vae: Vae, value: ValueNetwork, masked: bool, count_cap: f64 },
}

fn load<T>(path: PathBuf, f: impl FnOnce(&std::path::Path) -> Result<T, AgentError>) -> Result<T, CheckpointLoadError> {
    if !path.exists() {
        return Err(CheckpointLoadError::Missing(path));
    }
    f(&path).map_err(|source| CheckpointLoadError::Load { path, source })
}

pub fn load_agent(cfg: &ScenarioConfig, kind: AgentKind) -> Result<LoadedAgent, CheckpointLoadError> {
    let masked = cfg.evaluation.masked;
    let count_cap = cfg.dqn.count_cap;
    Ok(match kind {
        AgentKind::Heuristic => LoadedAgent::Heuristic {
            extended: cfg.heuristic.extended,
        },
        AgentKind::Drl => LoadedAgent::Drl {
            dqn: load(cfg.dqn_path(), DqnNetwork::load)?,
            masked,
            count_cap,
        },
        AgentKind::GenaiDrl => LoadedAgent::GenaiDrl {
            dqn: load(cfg.dqn_path(), DqnNetwork::load)?,
            vae: load(cfg.vae_path(), |p| Vae::load(p, cfg.vae.beta))?,
            value: load(cfg.value_path(), ValueNetwork::load)?,
            masked,
            count_cap,
        },
    })
}

fn greedy(dqn: &DqnNetwork, masked: bool, count_cap: f64) -> DqnAgent {
    let mut agent = DqnAgent::greedy(dqn.clone());
    agent.masked = masked;
    agent.count_cap = count_cap;
    agent
}

impl LoadedAgent {
    pub fn kind(&self) -> AgentKind {
        match self {
            LoadedAgent::Heuristic { .. } => AgentKind::Heuristic,
            LoadedAgent::Drl { .. } => AgentKind::Drl,
            LoadedAgent::GenaiDrl { .. } => AgentKind::GenaiDrl,
        }
    }

    /// One full episode on a fresh environment built from `sim`; returns the
    /// metrics and the final environment.
    pub fn run(&self, sim: &SimConfig) -> Result<(RunMetrics, Env), sfc_core::SimError> {
        let mut env = Env::generate(sim.clone())?;
        let metrics = match self {
            LoadedAgent::Heuristic { extended } => drive(&mut env, &mut Heuristic { extended: *extended }),
            LoadedAgent::Drl { dqn, masked, count_cap } => drive(
                &mut env,
                &mut Pipeline {
                    selector: RandomDc::new(sim.seed ^ DC_STREAM),
                    agent: greedy(dqn, *masked, *count_cap),
                },
            ),
            LoadedAgent::GenaiDrl {
                dqn,
                vae,
                value,
                masked,
                count_cap,
            } => {
                let mut selector = GenAiSelector::new(vae.clone(), value.clone());
                selector.count_cap = *count_cap;
                drive(
                    &mut env,
                    &mut Pipeline {
                        selector,
                        agent: greedy(dqn, *masked, *count_cap),
                    },
                )
            }
        };
        Ok((metrics, env))
    }
}

fn drive<P: Policy>(env: &mut Env, policy: &mut P) -> RunMetrics {
    run_episode(env, policy, &mut NoHook)
}

/// One episode, as written to the JSON-lines output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub agent: AgentKind,
    pub dc_count: usize,
    pub request_count: u32,
    pub seed: u64,
    pub acc_ratio: f64,
    pub per_type_acc: PerKind<Option<f64>>,
    /// Over accepted requests only; null for kinds with none accepted.
    pub mean_e2e_ms: PerKind<Option<f64>>,
    pub throughput_gbps: f64,
    pub generated: PerKind<u32>,
    pub accepted: PerKind<u32>,
    pub dropped: PerKind<u32>,
    pub pending: PerKind<u32>,
    pub total_reward: f64,
    pub ticks: u64,
    pub tick_budget_exhausted: bool,
}

impl RunRecord {
    pub fn new(agent: AgentKind, sim: &SimConfig, m: &RunMetrics) -> Self {
        Self {
            agent,
            dc_count: sim.dc_count,
            request_count: sim.request_count_multiplier,
            seed: sim.seed,
            acc_ratio: m.acceptance_ratio().unwrap_or(0.0),
            per_type_acc: m.per_kind_acceptance(),
            mean_e2e_ms: m.mean_e2e(),
            throughput_gbps: m.throughput_gbps(),
            generated: m.generated.clone(),
            accepted: m.accepted.clone(),
            dropped: m.dropped.clone(),
            pending: m.generated.map(|k, _| m.pending(k)),
            total_reward: m.total_reward,
            ticks: m.ticks,
            tick_budget_exhausted: m.tick_budget_exhausted,
        }
    }
}

/// All episodes of one (agent, DC count, request count) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub agent: AgentKind,
    pub dc_count: usize,
    pub request_count: u32,
    pub outcome: Result<Vec<RunRecord>, String>,
}

impl CellResult {
    pub fn file_stem(&self) -> String {
        format!("{}_dc{}_rc{}", self.agent, self.dc_count, self.request_count)
    }
}

/// Environment settings of one episode: the scenario's simulator with the
/// cell's axes and seed substituted.
pub fn cell_sim(base: &SimConfig, dc_count: usize, request_count: u32, seed: u64) -> SimConfig {
    SimConfig {
        dc_count,
        request_count_multiplier: request_count,
        seed,
        ..base.clone()
    }
}

/// Runs every (agent, dc_count, request_count, seed) combination. Agents are
/// loaded once; a failed load marks that agent's cells as failed and the
/// rest of the sweep continues. Output order follows the axes, whatever order
/// the workers finish in.
pub fn run_sweep(cfg: &ScenarioConfig) -> Vec<CellResult> {
    let s = &cfg.sweep;
    let agents: Vec<(AgentKind, Result<LoadedAgent, String>)> =
        s.agents.iter().map(|&k| (k, load_agent(cfg, k).map_err(|e| e.to_string()))).collect();
    let mut jobs = Vec::new();
    for (ai, _) in agents.iter().enumerate() {
        for &dc in &s.dc_counts {
            for &rc in &s.request_counts {
                for &seed in &s.seeds {
                    jobs.push((ai, dc, rc, seed));
                }
            }
        }
    }
    let run_all = || -> Vec<Result<RunRecord, String>> {
        jobs.par_iter()
            .map(|&(ai, dc, rc, seed)| {
                let (kind, agent) = &agents[ai];
                let agent = agent.as_ref().map_err(Clone::clone)?;
                let sim = cell_sim(&cfg.sim, dc, rc, seed);
                let (m, _) = agent.run(&sim).map_err(|e| e.to_string())?;
                Ok(RunRecord::new(*kind, &sim, &m))
            })
            .collect()
    };
    let results = match s.workers {
        0 => run_all(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(run_all))
            .unwrap_or_else(|_| run_all()),
    };

    let mut cells = Vec::new();
    let mut results = results.into_iter();
    for (kind, _) in &agents {
        for &dc in &s.dc_counts {
            for &rc in &s.request_counts {
                let runs: Result<Vec<_>, _> = results.by_ref().take(s.seeds.len()).collect();
                cells.push(CellResult {
                    agent: *kind,
                    dc_count: dc,
                    request_count: rc,
                    outcome: runs,
                });
            }
        }
    }
    cells
}

/// Mean and sample standard deviation; zero deviation for fewer than two values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
