//! Transition dataset for the DC value model.
//!
//! On disk: `u64` row count, `u32` state width, then per row the state,
//! the next state and the value label, all little-endian `f32`. A JSON
//! sidecar (`<file>.schema.json`) names every column.

use crate::dqn::{DqnAgent, DqnNetwork};
use crate::value::{compute_value_label, ValueLabelWeights};
use crate::AgentError;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sfc_core::features::{encode_dc_state, DC_STATE_DIM};
use sfc_core::{run_episode, Env, EpisodeHook, Pipeline, RandomDc, SfcKind, SimConfig, StepRecord, VnfType};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub state: [f32; DC_STATE_DIM],
    pub next_state: [f32; DC_STATE_DIM],
    pub value: f32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<TransitionRow>,
}

/// Column names of the DC state vector, in encoding order.
pub fn state_columns() -> Vec<String> {
    let mut c: Vec<String> = ["free_cpu", "free_storage", "free_ram"].map(String::from).into();
    for prefix in ["installed", "busy"] {
        c.extend(VnfType::ALL.iter().map(|v| format!("{prefix}_{}", v.name())));
    }
    c.push("link_free_mean".into());
    c.push("link_free_min".into());
    for k in SfcKind::ALL {
        for f in ["allocatable", "min_slack", "bandwidth"] {
            c.push(format!("{}_{f}", k.name()));
        }
    }
    c
}

#[derive(Serialize)]
struct Schema {
    rows: usize,
    state_dim: usize,
    header: &'static str,
    row_layout: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".schema.json");
        path.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> Result<(), AgentError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.rows.len() as u64).to_le_bytes())?;
        w.write_all(&(DC_STATE_DIM as u32).to_le_bytes())?;
        for r in &self.rows {
            for x in r.state.iter().chain(&r.next_state).chain(std::iter::once(&r.value)) {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;

        let cols = state_columns();
        let mut layout: Vec<String> = cols.iter().map(|c| format!("state.{c}")).collect();
        layout.extend(cols.iter().map(|c| format!("next_state.{c}")));
        layout.push("value".into());
        let schema = Schema {
            rows: self.rows.len(),
            state_dim: DC_STATE_DIM,
            header: "u64 row count, u32 state_dim; then rows of f32, little-endian",
            row_layout: layout,
        };
        let json = serde_json::to_string_pretty(&schema).map_err(|e| AgentError::BadDataset(e.to_string()))?;
        std::fs::write(Self::sidecar_path(path), json + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, AgentError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        if dim != DC_STATE_DIM {
            return Err(AgentError::BadDataset(format!("state width {dim}, expected {DC_STATE_DIM}")));
        }
        let width = 2 * dim + 1;
        let mut buf = vec![0u8; width * 4];
        let mut rows = Vec::with_capacity(n.min(1 << 20));
        for i in 0..n {
            r.read_exact(&mut buf)
                .map_err(|_| AgentError::BadDataset(format!("truncated at row {i} of {n}")))?;
            let f: Vec<f32> = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            if f.iter().any(|x| !x.is_finite()) {
                return Err(AgentError::BadDataset(format!("non-finite value in row {i}")));
            }
            rows.push(TransitionRow {
                state: f[..dim].try_into().expect("sized"),
                next_state: f[dim..2 * dim].try_into().expect("sized"),
                value: f[2 * dim],
            });
        }
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(AgentError::BadDataset("trailing bytes after the last row".into()));
        }
        Ok(Self { rows })
    }

    /// Shuffled `(train, heldout)` split with `heldout_fraction` of the rows held out.
    pub fn split<R: Rng + ?Sized>(&self, heldout_fraction: f64, rng: &mut R) -> (Vec<TransitionRow>, Vec<TransitionRow>) {
        let mut rows = self.rows.clone();
        rows.shuffle(rng);
        let held = ((rows.len() as f64 * heldout_fraction).round() as usize).min(rows.len());
        let heldout = rows.split_off(rows.len() - held);
        (rows, heldout)
    }
}

/// Pairs every state with the next state of a random other row; the
/// control for whether the VAE learns anything about transitions.
pub fn shuffle_pairs<R: Rng + ?Sized>(rows: &[TransitionRow], rng: &mut R) -> Vec<TransitionRow> {
    let mut next: Vec<[f32; DC_STATE_DIM]> = rows.iter().map(|r| r.next_state).collect();
    next.shuffle(rng);
    rows.iter()
        .zip(next)
        .map(|(r, n)| TransitionRow {
            next_state: n,
            ..r.clone()
        })
        .collect()
}

struct RowCollector<'a> {
    rows: &'a mut Vec<TransitionRow>,
    weights: &'a ValueLabelWeights,
    count_cap: f64,
}

impl EpisodeHook for RowCollector<'_> {
    fn wants_before(&self) -> bool {
        true
    }

    fn on_step(&mut self, r: &StepRecord<'_>) {
        let before = r.before.expect("requested snapshot");
        self.rows.push(TransitionRow {
            state: encode_dc_state(before, r.dc, self.count_cap),
            next_state: encode_dc_state(r.after, r.dc, self.count_cap),
            value: compute_value_label(before, r.after, r.dc, self.weights) as f32,
        });
    }
}

/// Runs greedy-DQN episodes with a uniformly random DC each step, one row
/// per step for the chosen DC, until at least `target_rows` rows exist.
pub fn collect_dataset(
    sim: &SimConfig,
    dqn: &DqnNetwork,
    weights: &ValueLabelWeights,
    count_cap: f64,
    seed: u64,
    target_rows: usize,
    max_episodes: usize,
) -> Result<Dataset, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for _ in 0..max_episodes {
        if rows.len() >= target_rows {
            break;
        }
        let mut env = Env::generate(SimConfig {
            seed: rng.gen(),
            ..sim.clone()
        })
        .map_err(|e| AgentError::InvalidConfig(e.to_string()))?;
        let mut agent = DqnAgent::greedy(dqn.clone());
        agent.count_cap = count_cap;
        let mut policy = Pipeline {
            selector: RandomDc::new(rng.gen()),
            agent,
        };
        let mut hook = RowCollector {
            rows: &mut rows,
            weights,
            count_cap,
        };
        run_episode(&mut env, &mut policy, &mut hook);
    }
    if rows.len() < target_rows {
        return Err(AgentError::DatasetTooSmall {
            rows: rows.len(),
            target: target_rows,
        });
    }
    Ok(Dataset { rows })
}
