use crate::dqn::{action_space, DqnAgent, DqnConfig, DqnNetwork, Transition};
use crate::replay::ReplayBuffer;
use crate::AgentError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sfc_core::features::encode_state;
use sfc_core::{run_episode, Env, Pipeline, RandomDc, SimConfig, StepRecord, VnfType};
use sfc_nn::{huber, Adam, Matrix, Module};

/// One TD step on `batch`: Huber loss between `Q(s, a)` and
/// `r + γ^ticks max_a' Q_target(s', a')` (no bootstrap on terminal transitions).
pub fn train_batch(
    net: &mut DqnNetwork,
    target: &DqnNetwork,
    batch: &[&Transition],
    adam: &mut Adam,
    gamma: f64,
) -> Result<f32, AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let next: Vec<_> = batch.iter().map(|t| &t.next_state).collect();
    let q_next = target.forward(&next)?;
    let y: Vec<f32> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let best = q_next.row(i).iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let bootstrap = if t.terminal { 0.0 } else { gamma.powi(t.ticks as i32) as f32 * best };
            t.reward + bootstrap
        })
        .collect();
    let states: Vec<_> = batch.iter().map(|t| &t.state).collect();
    let (q, cache) = net.forward_train(&states)?;
    let pred: Vec<f32> = batch.iter().enumerate().map(|(i, t)| q.get(i, t.action)).collect();
    let (loss, g) = huber(&pred, &y)?;
    let mut grad_q = Matrix::zeros(q.rows(), q.cols());
    for (i, t) in batch.iter().enumerate() {
        grad_q.set(i, t.action, g[i]);
    }
    let grads = net.backward(&cache, &grad_q)?;
    adam.step(net, &grads)?;
    Ok(loss)
}

/// One line of the training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub reward: f64,
    /// Mean TD loss of the most recent update block, if any has run.
    pub loss: Option<f64>,
    pub epsilon: f64,
    pub acc_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedDqn {
    pub net: DqnNetwork,
    pub curve: Vec<CurvePoint>,
}

/// Block schedule: `episodes_per_block` ε-greedy episodes with a random DC
/// each step, then `updates_per_block` replay updates; `blocks` times.
/// Every episode uses a fresh environment seeded from `seed`.
pub fn train_dqn(
    cfg: &DqnConfig,
    sim: &SimConfig,
    blocks: usize,
    seed: u64,
    mut on_episode: impl FnMut(&CurvePoint),
) -> Result<TrainedDqn, AgentError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DqnNetwork::new(cfg, action_space(VnfType::COUNT), &mut rng);
    let mut target = net.clone();
    let mut adam = Adam::new(cfg.learning_rate);
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut curve = Vec::new();
    let mut last_loss = None;
    let mut updates = 0usize;

    for _ in 0..blocks {
        for _ in 0..cfg.episodes_per_block {
            let episode = curve.len();
            let epsilon = cfg.epsilon(episode);
            let env_seed: u64 = rng.gen();
            let mut env = Env::generate(SimConfig {
                seed: env_seed,
                ..sim.clone()
            })
            .map_err(|e| AgentError::InvalidConfig(e.to_string()))?;
            let mut agent = DqnAgent::new(net.clone(), epsilon, rng.gen());
            agent.count_cap = cfg.count_cap;
            let mut policy = Pipeline {
                selector: RandomDc::new(rng.gen()),
                agent,
            };
            let mut reward = 0.0;
            let count_cap = cfg.count_cap;
            let mut hook = Recorder {
                replay: &mut replay,
                reward: &mut reward,
                count_cap,
            };
            let metrics = run_episode(&mut env, &mut policy, &mut hook);
            let point = CurvePoint {
                episode,
                reward,
                loss: last_loss,
                epsilon,
                acc_ratio: metrics.acceptance_ratio().unwrap_or(0.0),
            };
            on_episode(&point);
            curve.push(point);
        }
        if replay.len() < cfg.batch_size {
            continue;
        }
        let mut total = 0.0;
        for _ in 0..cfg.updates_per_block {
            let batch = replay.sample(cfg.batch_size, &mut rng);
            total += train_batch(&mut net, &target, &batch, &mut adam, cfg.gamma)? as f64;
            updates += 1;
            if updates.is_multiple_of(cfg.target_sync_updates) {
                target.copy_from(&net)?;
            }
        }
        if cfg.updates_per_block > 0 {
            last_loss = Some(total / cfg.updates_per_block as f64);
        }
        if net.params().iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(AgentError::Diverged { epoch: curve.len() });
        }
    }
    Ok(TrainedDqn { net, curve })
}

/// Turns episode steps into replay transitions seen from the acting DC.
struct Recorder<'a> {
    replay: &'a mut ReplayBuffer,
    reward: &'a mut f64,
    count_cap: f64,
}

impl sfc_core::EpisodeHook for Recorder<'_> {
    fn wants_before(&self) -> bool {
        true
    }

    fn on_step(&mut self, r: &StepRecord<'_>) {
        let before = r.before.expect("requested snapshot");
        *self.reward += r.outcome.reward;
        self.replay.push(Transition {
            state: encode_state(before, r.dc, self.count_cap),
            action: r.action.0,
            reward: r.outcome.reward as f32,
            next_state: encode_state(r.after, r.dc, self.count_cap),
            terminal: r.outcome.done,
            ticks: (r.after.now() - before.now()) as u32,
        });
    }
}
