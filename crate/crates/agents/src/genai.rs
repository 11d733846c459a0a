use crate::vae::Vae;
use crate::value::ValueNetwork;
use crate::AgentError;
use sfc_core::features::{encode_dc_state, DEFAULT_COUNT_CAP};
use sfc_core::{DcId, DcSelector, Env};
use sfc_nn::Matrix;

/// Value of every DC: the value network applied to the VAE's μ of its state.
pub fn dc_scores(env: &Env, vae: &Vae, value: &ValueNetwork, count_cap: f64) -> Result<Vec<f32>, AgentError> {
    let states: Vec<_> = (0..env.dc_count()).map(|dc| encode_dc_state(env, dc, count_cap)).collect();
    value.score(&vae.embed(&Matrix::from_rows(&states)?)?)
}

/// Index of the largest score, lowest index on ties.
pub fn argmax_lowest(scores: &[f32]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// The DC with the highest predicted value; deterministic, no sampling.
pub fn select_dc(env: &Env, vae: &Vae, value: &ValueNetwork) -> Result<DcId, AgentError> {
    Ok(argmax_lowest(&dc_scores(env, vae, value, DEFAULT_COUNT_CAP)?))
}

#[derive(Debug, Clone)]
pub struct GenAiSelector {
    pub vae: Vae,
    pub value: ValueNetwork,
    pub count_cap: f64,
}

impl GenAiSelector {
    pub fn new(vae: Vae, value: ValueNetwork) -> Self {
        Self {
            vae,
            value,
            count_cap: DEFAULT_COUNT_CAP,
        }
    }
}

impl DcSelector for GenAiSelector {
    fn select_dc(&mut self, env: &Env) -> DcId {
        let scores = dc_scores(env, &self.vae, &self.value, self.count_cap).expect("fixed network shapes");
        argmax_lowest(&scores)
    }
}
