//! Command-line entry points. Exit codes: 0 success, 2 configuration error,
//! 3 checkpoint error, 1 anything else.

use crate::config::{parse_config, AgentKind, ConfigError, ScenarioConfig};
use crate::export::{export_metrics, write_jsonl, ExportError};
use crate::run::{load_agent, run_sweep, CheckpointLoadError, RunRecord};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sfc_agents::{collect_dataset, train_dqn, train_value, train_vae, AgentError, Dataset, DqnNetwork, Vae, ValueNetwork};
use sfc_nn::Adam;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "sfc", version, about = "SFC provisioning simulator, agent training and sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Overrides the seed: the environment seed for `simulate`, the training
    /// seed for training commands, the seed list for `evaluate` and `sweep`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode of the configured agent.
    Simulate(Common),
    /// Record (state, next state, value) rows with the trained DQN and random DCs.
    CollectDataset(Common),
    /// Train the DQN on the `[sim]` environment.
    TrainDqn(Common),
    /// Train the VAE on the collected dataset.
    TrainVae(Common),
    /// Train the value network on the frozen VAE embeddings.
    TrainValue(Common),
    /// Run the configured agent over the seed list on the `[sim]` environment.
    Evaluate(Common),
    /// Run the full agent × DC count × request count × seed grid.
    Sweep(Common),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Checkpoint(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<CheckpointLoadError> for CliError {
    fn from(e: CheckpointLoadError) -> Self {
        CliError::Checkpoint(e.to_string())
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        CliError::Other(e.to_string())
    }
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

fn checkpoint(path: &Path) -> impl FnOnce(AgentError) -> CliError + '_ {
    move |e| CliError::Checkpoint(format!("{}: {e}", path.display()))
}

fn prepare(common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut cfg = parse_config(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| other(format!("{}: {e}", cfg.output_dir.display())))?;
    Ok(cfg)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => simulate(&c),
        Command::CollectDataset(c) => collect(&c),
        Command::TrainDqn(c) => train_dqn_cmd(&c),
        Command::TrainVae(c) => train_vae_cmd(&c),
        Command::TrainValue(c) => train_value_cmd(&c),
        Command::Evaluate(c) => evaluate(&c),
        Command::Sweep(c) => sweep(&c),
    }
}

fn simulate(c: &Common) -> Result<(), CliError> {
    let mut cfg = prepare(c)?;
    if let Some(seed) = c.seed {
        cfg.sim.seed = seed;
    }
    let agent = load_agent(&cfg, cfg.agent)?;
    let (metrics, _) = agent.run(&cfg.sim).map_err(other)?;
    let record = RunRecord::new(cfg.agent, &cfg.sim, &metrics);
    write_jsonl(&cfg.output_dir.join("simulate.jsonl"), std::slice::from_ref(&record))?;
    println!(
        "{} on {} DCs, request count {}, seed {}: acceptance {:.4}, throughput {:.4} Gbps",
        record.agent, record.dc_count, record.request_count, record.seed, record.acc_ratio, record.throughput_gbps
    );
    Ok(())
}

fn train_dqn_cmd(c: &Common) -> Result<(), CliError> {
    let cfg = prepare(c)?;
    let seed = c.seed.unwrap_or(cfg.sim.seed);
    let trained = train_dqn(&cfg.dqn, &cfg.sim, cfg.training.dqn_blocks, seed, |p| {
        if (p.episode + 1) % cfg.dqn.episodes_per_block == 0 {
            eprintln!(
                "episode {:>5}  reward {:>9.1}  acceptance {:.3}  epsilon {:.3}",
                p.episode + 1,
                p.reward,
                p.acc_ratio,
                p.epsilon
            );
        }
    })
    .map_err(other)?;
    let path = cfg.dqn_path();
    trained.net.save(&path).map_err(checkpoint(&path))?;
    write_jsonl(&cfg.output_dir.join("dqn_curve.jsonl"), &trained.curve)?;
    println!("saved {}", path.display());
    Ok(())
}

fn collect(c: &Common) -> Result<(), CliError> {
    let cfg = prepare(c)?;
    let seed = c.seed.unwrap_or(cfg.sim.seed);
    let dqn_path = cfg.dqn_path();
    let dqn = load_checked(&dqn_path, DqnNetwork::load)?;
    let t = &cfg.training;
    let data = collect_dataset(
        &cfg.sim,
        &dqn,
        &cfg.value_label,
        cfg.dqn.count_cap,
        seed,
        t.dataset_rows,
        t.dataset_max_episodes,
    )
    .map_err(other)?;
    let path = cfg.dataset_path();
    data.write(&path).map_err(other)?;
    println!("wrote {} rows to {}", data.len(), path.display());
    Ok(())
}

fn load_checked<T>(path: &Path, f: impl FnOnce(&Path) -> Result<T, AgentError>) -> Result<T, CliError> {
    if !path.exists() {
        return Err(CliError::Checkpoint(format!("{} does not exist", path.display())));
    }
    f(path).map_err(checkpoint(path))
}

fn train_vae_cmd(c: &Common) -> Result<(), CliError> {
    let cfg = prepare(c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed.unwrap_or(cfg.sim.seed));
    let data = load_checked(&cfg.dataset_path(), Dataset::read)?;
    let (train, heldout) = data.split(cfg.vae.heldout_fraction, &mut rng);
    let mut vae = Vae::new(&cfg.vae, &mut rng);
    let mut adam = Adam::new(cfg.vae.learning_rate);
    let curve = train_vae(&mut vae, &train, &heldout, cfg.vae.epochs, cfg.vae.batch_size, &mut adam, &mut rng)
        .map_err(other)?;
    let path = cfg.vae_path();
    vae.save(&path).map_err(checkpoint(&path))?;
    write_jsonl(&cfg.output_dir.join("vae_curve.jsonl"), &curve.epochs)?;
    println!(
        "held-out reconstruction {:.5} -> {:.5}; saved {}",
        curve.initial_heldout_recon,
        curve.final_heldout_recon(),
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct LossPoint {
    epoch: usize,
    loss: f64,
}

fn train_value_cmd(c: &Common) -> Result<(), CliError> {
    let cfg = prepare(c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed.unwrap_or(cfg.sim.seed));
    let data = load_checked(&cfg.dataset_path(), Dataset::read)?;
    let vae = load_checked(&cfg.vae_path(), |p| Vae::load(p, cfg.vae.beta))?;
    let mut value = ValueNetwork::new(vae.latent(), cfg.vae.value_hidden, &mut rng);
    let mut adam = Adam::new(cfg.vae.value_learning_rate);
    let curve = train_value(
        &mut value,
        &vae,
        &data.rows,
        cfg.vae.value_epochs,
        cfg.vae.batch_size,
        &mut adam,
        &mut rng,
    )
    .map_err(other)?;
    let path = cfg.value_path();
    value.save(&path).map_err(checkpoint(&path))?;
    let points: Vec<LossPoint> = curve.iter().enumerate().map(|(epoch, &loss)| LossPoint { epoch, loss }).collect();
    write_jsonl(&cfg.output_dir.join("value_curve.jsonl"), &points)?;
    println!(
        "value loss {:.5} -> {:.5}; saved {}",
        curve[0],
        curve.last().copied().unwrap_or(curve[0]),
        path.display()
    );
    Ok(())
}

fn evaluate(c: &Common) -> Result<(), CliError> {
    let mut cfg = prepare(c)?;
    if let Some(seed) = c.seed {
        cfg.sweep.seeds = vec![seed];
    }
    load_agent(&cfg, cfg.agent)?;
    cfg.sweep.agents = vec![cfg.agent];
    cfg.sweep.dc_counts = vec![cfg.sim.dc_count];
    cfg.sweep.request_counts = vec![cfg.sim.request_count_multiplier];
    report(&cfg, run_sweep(&cfg))
}

fn sweep(c: &Common) -> Result<(), CliError> {
    let mut cfg = prepare(c)?;
    if let Some(seed) = c.seed {
        cfg.sweep.seeds = vec![seed];
    }
    report(&cfg, run_sweep(&cfg))
}

fn report(cfg: &ScenarioConfig, cells: Vec<crate::run::CellResult>) -> Result<(), CliError> {
    export_metrics(&cells, &cfg.output_dir)?;
    let mut failed = Vec::new();
    for cell in &cells {
        match &cell.outcome {
            Ok(runs) => {
                let acc: Vec<f64> = runs.iter().map(|r| r.acc_ratio).collect();
                let (mean, std) = crate::run::mean_std(&acc);
                println!(
                    "{:<10} dc={} rc={}  acceptance {mean:.4} ± {std:.4} over {} seeds",
                    cell.agent,
                    cell.dc_count,
                    cell.request_count,
                    runs.len()
                );
            }
            Err(e) => {
                eprintln!("{:<10} dc={} rc={}  failed: {e}", cell.agent, cell.dc_count, cell.request_count);
                failed.push(cell.agent);
            }
        }
    }
    failed.dedup();
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|a: &AgentKind| a.name()).collect();
        Err(CliError::Checkpoint(format!("cells failed for {}", names.join(", "))))
    }
}
