use crate::AgentError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sfc_core::features::{encode_state, StateTriple, DC_RESOURCE_DIM, DC_SFC_DIM, NETWORK_DIM};
use sfc_core::{Action, ActionAgent, DcId, Env};
use sfc_nn::{
    load_layers, save_layers, Activation, Attention, AttentionCache, DenseCache, DenseLayer, Grads, Matrix, Mlp,
    MlpCache, Module,
};
use std::path::Path;

/// Head width for a catalog of `vnf_types` types: place each, uninstall each, idle.
pub fn action_space(vnf_types: usize) -> usize {
    2 * vnf_types + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    /// Output width of each input branch, shared so they can be attended over.
    pub branch_width: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Per-episode multiplicative decay of ε.
    pub epsilon_decay: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Hard target copy every this many gradient updates.
    pub target_sync_updates: usize,
    pub updates_per_block: usize,
    pub episodes_per_block: usize,
    pub learning_rate: f32,
    pub count_cap: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            branch_width: 64,
            hidden: vec![128, 64],
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.97,
            replay_capacity: 50_000,
            batch_size: 64,
            target_sync_updates: 100,
            updates_per_block: 350,
            episodes_per_block: 20,
            learning_rate: 5e-4,
            count_cap: sfc_core::features::DEFAULT_COUNT_CAP,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon must be in [0, 1]");
            }
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay must be in (0, 1]");
        }
        if self.branch_width == 0 || self.hidden.contains(&0) {
            return bad("layer widths must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("replay_capacity must be at least batch_size > 0");
        }
        if self.target_sync_updates == 0 || self.episodes_per_block == 0 {
            return bad("target_sync_updates and episodes_per_block must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.count_cap > 0.0) {
            return bad("learning_rate and count_cap must be positive");
        }
        Ok(())
    }

    /// ε after `episode` completed episodes.
    pub fn epsilon(&self, episode: usize) -> f64 {
        (self.epsilon_start * self.epsilon_decay.powi(episode as i32)).max(self.epsilon_end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateTriple,
    pub action: usize,
    pub reward: f32,
    pub next_state: StateTriple,
    pub terminal: bool,
    /// Simulated ticks between `state` and `next_state`; the bootstrap is
    /// discounted by `γ^ticks`, so decisions within one tick are not discounted.
    pub ticks: u32,
}

const BRANCH_DIMS: [usize; 3] = [DC_RESOURCE_DIM, DC_SFC_DIM, NETWORK_DIM];

/// Three input branches → 3-token attention → flatten → hidden stack → Q head.
#[derive(Debug, Clone, PartialEq)]
pub struct DqnNetwork {
    pub branches: [DenseLayer; 3],
    pub attention: Attention,
    pub trunk: Mlp,
}

pub(crate) struct DqnCache {
    branches: [DenseCache; 3],
    attention: AttentionCache,
    trunk: MlpCache,
}

fn branch_inputs(states: &[&StateTriple]) -> [Matrix; 3] {
    let rows = |f: fn(&StateTriple) -> &[f32]| {
        let mut m = Matrix::zeros(states.len(), f(states.first().copied().unwrap_or(&StateTriple::zeros())).len());
        for (i, s) in states.iter().enumerate() {
            m.row_mut(i).copy_from_slice(f(s));
        }
        m
    };
    [rows(|s| &s.dc_resources), rows(|s| &s.dc_sfc), rows(|s| &s.network)]
}

impl DqnNetwork {
    pub fn new<R: Rng + ?Sized>(cfg: &DqnConfig, actions: usize, rng: &mut R) -> Self {
        let w = cfg.branch_width;
        let branches = BRANCH_DIMS.map(|d| DenseLayer::new(d, w, Activation::Relu, rng));
        let attention = Attention::new(w, 3, rng);
        let mut dims = vec![3 * w];
        dims.extend(&cfg.hidden);
        dims.push(actions);
        let trunk = Mlp::new(&dims, Activation::Relu, Activation::Linear, rng);
        Self {
            branches,
            attention,
            trunk,
        }
    }

    pub fn action_count(&self) -> usize {
        self.trunk.output_dim()
    }

    /// Q-values for a batch, one row per state.
    pub fn forward(&self, states: &[&StateTriple]) -> Result<Matrix, AgentError> {
        let x = branch_inputs(states);
        let h: Vec<Matrix> = self.branches.iter().zip(&x).map(|(l, x)| l.forward(x)).collect::<Result<_, _>>()?;
        let tokens = Matrix::hstack(&[&h[0], &h[1], &h[2]]);
        let mixed = self.attention.forward(&tokens)?;
        Ok(self.trunk.forward(&mixed)?)
    }

    pub fn q_values(&self, state: &StateTriple) -> Vec<f32> {
        self.forward(&[state]).expect("fixed input widths").into_vec()
    }

    pub(crate) fn forward_train(&self, states: &[&StateTriple]) -> Result<(Matrix, DqnCache), AgentError> {
        let x = branch_inputs(states);
        let [b0, b1, b2] = &self.branches;
        let c = [b0.forward_train(&x[0])?, b1.forward_train(&x[1])?, b2.forward_train(&x[2])?];
        let tokens = Matrix::hstack(&[&c[0].output, &c[1].output, &c[2].output]);
        let (mixed, attention) = self.attention.forward_train(&tokens)?;
        let trunk = self.trunk.forward_train(&mixed)?;
        let q = trunk.output().clone();
        Ok((
            q,
            DqnCache {
                branches: c,
                attention,
                trunk,
            },
        ))
    }

    pub(crate) fn backward(&self, cache: &DqnCache, grad_q: &Matrix) -> Result<Grads, AgentError> {
        let (g_mixed, g_trunk) = self.trunk.backward(&cache.trunk, grad_q)?;
        let (g_tokens, g_att) = self.attention.backward(&cache.attention, &g_mixed)?;
        let w = self.attention.width();
        let mut grads = Vec::new();
        for (i, (l, c)) in self.branches.iter().zip(&cache.branches).enumerate() {
            let (_, g) = l.backward(c, &g_tokens.columns(i * w, w))?;
            grads.extend(g);
        }
        grads.extend(g_att);
        grads.extend(g_trunk);
        Ok(grads)
    }

    /// Gradients of `Σ grad_q ⊙ Q(states)`, in [`Module::params`] order.
    pub fn gradients(&self, states: &[&StateTriple], grad_q: &Matrix) -> Result<Grads, AgentError> {
        let (_, cache) = self.forward_train(states)?;
        self.backward(&cache, grad_q)
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        save_layers(path, &self.layers())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        Self::from_layers(load_layers(path)?)
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self, AgentError> {
        let arch = |m: String| AgentError::Checkpoint(sfc_nn::CheckpointError::Architecture(m));
        if layers.len() < 7 {
            return Err(arch(format!("expected at least 7 layers, found {}", layers.len())));
        }
        let mut it = layers.into_iter();
        let mut branch = || it.next().expect("length checked");
        let branches = [branch(), branch(), branch()];
        for (l, d) in branches.iter().zip(BRANCH_DIMS) {
            if l.input_dim() != d {
                return Err(arch(format!("branch expects {d} inputs, layer has {}", l.input_dim())));
            }
        }
        let w = branches[0].output_dim();
        if branches.iter().any(|l| l.output_dim() != w) {
            return Err(arch("branch widths differ".into()));
        }
        let (q, k, v) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        let attention = Attention::from_layers(q, k, v, 3).map_err(|e| arch(e.to_string()))?;
        if attention.width() != w {
            return Err(arch("attention width differs from branch width".into()));
        }
        let trunk = Mlp::from_layers(it.collect()).map_err(|e| arch(e.to_string()))?;
        if trunk.input_dim() != 3 * w {
            return Err(arch(format!("trunk expects {} inputs, has {}", 3 * w, trunk.input_dim())));
        }
        Ok(Self {
            branches,
            attention,
            trunk,
        })
    }
}

impl Module for DqnNetwork {
    fn params(&self) -> Vec<&[f32]> {
        let mut p: Vec<&[f32]> = self.branches.iter().flat_map(|l| l.params()).collect();
        p.extend(self.attention.params());
        p.extend(self.trunk.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f32]> {
        let mut p: Vec<&mut [f32]> = self.branches.iter_mut().flat_map(|l| l.params_mut()).collect();
        p.extend(self.attention.params_mut());
        p.extend(self.trunk.params_mut());
        p
    }

    fn layers(&self) -> Vec<&DenseLayer> {
        let mut l: Vec<&DenseLayer> = self.branches.iter().collect();
        l.extend(self.attention.layers());
        l.extend(self.trunk.layers());
        l
    }
}

fn argmax_where(q: &[f32], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in q.iter().enumerate() {
        if allowed(i) && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// ε-greedy: uniform over all codes with probability ε, else the argmax
/// (lowest code on ties).
pub fn select_action<R: Rng + ?Sized>(q: &[f32], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..q.len());
    }
    argmax_where(q, |_| true).expect("non-empty q")
}

/// Greedy over the codes `valid` admits; idle if none is admitted.
pub fn select_masked_action(q: &[f32], valid: impl Fn(usize) -> bool) -> usize {
    argmax_where(q, valid).unwrap_or(Action::IDLE.0)
}

/// Acts with a DQN on the DC it is handed.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub net: DqnNetwork,
    pub epsilon: f64,
    /// Restrict the greedy choice to actions the simulator would accept.
    pub masked: bool,
    pub count_cap: f64,
    rng: ChaCha8Rng,
}

impl DqnAgent {
    pub fn new(net: DqnNetwork, epsilon: f64, seed: u64) -> Self {
        use rand::SeedableRng;
        Self {
            net,
            epsilon,
            masked: false,
            count_cap: sfc_core::features::DEFAULT_COUNT_CAP,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn greedy(net: DqnNetwork) -> Self {
        Self::new(net, 0.0, 0)
    }
}

impl ActionAgent for DqnAgent {
    fn act(&mut self, env: &Env, dc: DcId) -> Action {
        let q = self.net.q_values(&encode_state(env, dc, self.count_cap));
        if self.masked {
            if self.epsilon > 0.0 && self.rng.gen::<f64>() < self.epsilon {
                return Action(self.rng.gen_range(0..q.len()));
            }
            return Action(select_masked_action(&q, |a| env.action_valid(dc, Action(a))));
        }
        Action(select_action(&q, self.epsilon, &mut self.rng))
    }
}
