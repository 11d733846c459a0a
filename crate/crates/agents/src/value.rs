use crate::dataset::TransitionRow;
use crate::vae::Vae;
use crate::AgentError;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sfc_core::features::hostable;
use sfc_core::{DcId, Env, RequestStatus, Resource, SfcRequest};
use sfc_nn::{load_layers, mse, save_layers, Activation, Adam, DenseLayer, Matrix, Mlp, Module};
use std::collections::HashSet;
use std::path::Path;

/// Weights of the DC value label. The label is a surrogate: a weighted sum
/// of what the DC just achieved and how useful it remains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValueLabelWeights {
    /// Per VNF allocation made on the DC during the step.
    pub allocation: f64,
    /// Per unit of urgency (1 − normalized slack) of waiting requests the DC could serve.
    pub urgency: f64,
    /// Mean free CPU/storage/RAM fraction.
    pub resources: f64,
    /// Mean free bandwidth fraction of incident links.
    pub links: f64,
    /// Per request dropped at the DC during the step (subtracted).
    pub drops: f64,
}

impl Default for ValueLabelWeights {
    fn default() -> Self {
        Self {
            allocation: 2.0,
            urgency: 1.0,
            resources: 0.5,
            links: 0.5,
            drops: 1.5,
        }
    }
}

/// `(vnf_index, dc)` pairs a request has claimed: finished allocations plus
/// the one in flight.
fn claims(r: &SfcRequest) -> impl Iterator<Item = (usize, DcId)> + '_ {
    r.allocations
        .iter()
        .copied()
        .chain(r.stage.map(|s| (r.next_vnf_index, s.dc)))
}

/// Where a request that dropped between the snapshots was sitting.
fn drop_site(before: &SfcRequest, after: &SfcRequest) -> DcId {
    before
        .stage
        .map(|s| s.dc)
        .or_else(|| after.last_dc())
        .unwrap_or(after.source_dc)
}

/// Value of `dc` for the step that took `before` to `after`.
pub fn compute_value_label(before: &Env, after: &Env, dc: DcId, w: &ValueLabelWeights) -> f64 {
    let mut allocations = 0usize;
    let mut drops = 0usize;
    for (b, a) in before.requests().iter().zip(after.requests()) {
        let old: HashSet<(usize, DcId)> = claims(b).collect();
        allocations += claims(a).filter(|c| c.1 == dc && !old.contains(c)).count();
        if b.is_live() && a.status == RequestStatus::Dropped && drop_site(b, a) == dc {
            drops += 1;
        }
    }

    let host = hostable(after, dc);
    let urgency: f64 = after
        .waiting()
        .filter(|r| r.next_vnf().is_some_and(|v| host[v.index()]) && after.can_reach(r, dc))
        .map(|r| 1.0 - r.slack_norm())
        .sum();

    let d = after.dc(dc);
    let catalog = after.vnf_catalog();
    let resources = [Resource::Compute, Resource::Storage, Resource::Ram]
        .iter()
        .map(|&r| d.free_fraction(catalog, r))
        .sum::<f64>()
        / 3.0;
    let fractions: Vec<f64> = after.topology().incident_links(dc).map(|l| l.free_fraction()).collect();
    let links = if fractions.is_empty() {
        0.0
    } else {
        fractions.iter().sum::<f64>() / fractions.len() as f64
    };

    w.allocation * allocations as f64 + w.urgency * urgency + w.resources * resources + w.links * links
        - w.drops * drops as f64
}

/// Scalar regressor over VAE mean embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNetwork {
    pub mlp: Mlp,
}

impl ValueNetwork {
    pub fn new<R: Rng + ?Sized>(latent: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(&[latent, hidden, 1], Activation::Relu, Activation::Linear, rng),
        }
    }

    pub fn score(&self, embeddings: &Matrix) -> Result<Vec<f32>, AgentError> {
        Ok(self.mlp.forward(embeddings)?.into_vec())
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        save_layers(path, &self.mlp.layers())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let mlp = Mlp::from_layers(load_layers(path)?)?;
        if mlp.output_dim() != 1 {
            return Err(AgentError::Checkpoint(sfc_nn::CheckpointError::Architecture(format!(
                "value network must output 1 value, has {}",
                mlp.output_dim()
            ))));
        }
        Ok(Self { mlp })
    }
}

impl Module for ValueNetwork {
    fn params(&self) -> Vec<&[f32]> {
        self.mlp.params()
    }

    fn params_mut(&mut self) -> Vec<&mut [f32]> {
        self.mlp.params_mut()
    }

    fn layers(&self) -> Vec<&DenseLayer> {
        self.mlp.layers()
    }
}

/// MSE regression of the rows' value labels on the frozen encoder's μ of
/// their states. Returns the training-set loss before training and after
/// each epoch.
pub fn train_value<R: Rng + ?Sized>(
    value: &mut ValueNetwork,
    vae: &Vae,
    rows: &[TransitionRow],
    epochs: usize,
    batch_size: usize,
    adam: &mut Adam,
    rng: &mut R,
) -> Result<Vec<f64>, AgentError> {
    if rows.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let mu = vae.embed(&Matrix::from_rows(&rows.iter().map(|r| r.state).collect::<Vec<_>>())?)?;
    let labels: Vec<f32> = rows.iter().map(|r| r.value).collect();
    let labels = labels.as_slice();
    let full_loss = |v: &ValueNetwork| -> Result<f64, AgentError> { Ok(mse(&v.score(&mu)?, labels)?.0 as f64) };
    let mut curve = vec![full_loss(value)?];
    let mut order: Vec<usize> = (0..labels.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch_size.max(1)) {
            let x = Matrix::from_rows(&chunk.iter().map(|&i| mu.row(i)).collect::<Vec<_>>())?;
            let y: Vec<f32> = chunk.iter().map(|&i| labels[i]).collect();
            let cache = value.mlp.forward_train(&x)?;
            let (_, g) = mse(cache.output().data(), &y)?;
            let (_, grads) = value.mlp.backward(&cache, &Matrix::from_vec(chunk.len(), 1, g)?)?;
            adam.step(value, &grads)?;
        }
        let l = full_loss(value)?;
        if !l.is_finite() {
            return Err(AgentError::Diverged { epoch });
        }
        curve.push(l);
    }
    Ok(curve)
}
