use crate::dataset::TransitionRow;
use crate::AgentError;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sfc_core::features::DC_STATE_DIM;
use sfc_nn::{
    kl_gaussian, load_layers, reparameterize, save_layers, Activation, Adam, DenseLayer, Grads, Matrix, Mlp, Module,
};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeConfig {
    pub latent: usize,
    pub hidden: usize,
    /// KL weight. The reconstruction term is summed over [0, 1] features,
    /// so at 1.0 the posterior collapses and μ carries no state information.
    pub beta: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub heldout_fraction: f64,
    pub value_hidden: usize,
    pub value_epochs: usize,
    pub value_learning_rate: f32,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            latent: 16,
            hidden: 64,
            beta: 0.01,
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            heldout_fraction: 0.1,
            value_hidden: 32,
            value_epochs: 30,
            value_learning_rate: 1e-3,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if self.latent == 0 || self.hidden == 0 || self.value_hidden == 0 || self.batch_size == 0 {
            return bad("latent, hidden, value_hidden and batch_size must be positive");
        }
        if !(self.beta >= 0.0) {
            return bad("beta must be non-negative");
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 1.0) {
            return bad("heldout_fraction must be in (0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.value_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        Ok(())
    }
}

/// Encoder `state → (μ, log σ²)`, decoder `z → predicted next state`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vae {
    /// Last layer emits μ and log σ² side by side.
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub beta: f32,
}

/// Loss parts for one batch, each averaged over samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeLoss {
    pub total: f32,
    /// Squared error summed over state features.
    pub recon: f32,
    pub kl: f32,
}

impl Vae {
    pub fn new<R: Rng + ?Sized>(cfg: &VaeConfig, rng: &mut R) -> Self {
        Self {
            encoder: Mlp::new(&[DC_STATE_DIM, cfg.hidden, 2 * cfg.latent], Activation::Relu, Activation::Linear, rng),
            decoder: Mlp::new(&[cfg.latent, cfg.hidden, DC_STATE_DIM], Activation::Relu, Activation::Sigmoid, rng),
            beta: cfg.beta,
        }
    }

    pub fn latent(&self) -> usize {
        self.decoder.input_dim()
    }

    /// Mean embeddings μ, one row per state.
    pub fn embed(&self, states: &Matrix) -> Result<Matrix, AgentError> {
        Ok(self.encoder.forward(states)?.columns(0, self.latent()))
    }

    /// Noise-free prediction: decode(μ).
    pub fn predict(&self, states: &Matrix) -> Result<Matrix, AgentError> {
        Ok(self.decoder.forward(&self.embed(states)?)?)
    }

    /// Loss and its gradients in [`Module::params`] order.
    pub fn loss_and_grads(&self, state: &Matrix, next: &Matrix, noise: &Matrix) -> Result<(VaeLoss, Grads), AgentError> {
        let (b, l) = (state.rows(), self.latent());
        if next.rows() != b || noise.shape() != (b, l) || next.cols() != self.decoder.output_dim() {
            return Err(sfc_nn::NnError::ShapeMismatch {
                expected: format!("{b} rows, noise {b}x{l}"),
                got: format!("next {:?}, noise {:?}", next.shape(), noise.shape()),
            }
            .into());
        }
        let enc = self.encoder.forward_train(state)?;
        let out = enc.output();
        let mu = out.columns(0, l);
        let lv = out.columns(l, l);
        let z = Matrix::from_vec(b, l, reparameterize(mu.data(), lv.data(), noise.data())?)?;
        let dec = self.decoder.forward_train(&z)?;
        let pred = dec.output();

        let n = b as f32;
        let mut recon = 0.0;
        let mut g_pred = Matrix::zeros(b, pred.cols());
        for ((g, p), t) in g_pred.data_mut().iter_mut().zip(pred.data()).zip(next.data()) {
            let r = p - t;
            recon += r * r;
            *g = 2.0 * r / n;
        }
        let (kl, g_mu_kl, g_lv_kl) = kl_gaussian(mu.data(), lv.data())?;
        let (recon, kl) = (recon / n, kl / n);

        let (g_z, g_dec) = self.decoder.backward(&dec, &g_pred)?;
        let mut g_out = Matrix::zeros(b, 2 * l);
        for i in 0..b {
            for j in 0..l {
                let k = i * l + j;
                let sigma = (0.5 * lv.data()[k]).exp();
                let gz = g_z.data()[k];
                g_out.set(i, j, gz + self.beta * g_mu_kl[k] / n);
                g_out.set(i, l + j, gz * noise.data()[k] * 0.5 * sigma + self.beta * g_lv_kl[k] / n);
            }
        }
        let (_, g_enc) = self.encoder.backward(&enc, &g_out)?;
        let loss = VaeLoss {
            total: recon + self.beta * kl,
            recon,
            kl,
        };
        Ok((loss, g_enc.into_iter().chain(g_dec).collect()))
    }

    /// Held-out reconstruction error of decode(μ), squared error summed
    /// over features and averaged over rows.
    pub fn recon_error(&self, rows: &[TransitionRow]) -> Result<f64, AgentError> {
        if rows.is_empty() {
            return Ok(0.0);
        }
        let (s, t) = matrices(rows)?;
        let p = self.predict(&s)?;
        let se: f64 = p.data().iter().zip(t.data()).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
        Ok(se / rows.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let mut layers = self.encoder.layers();
        layers.extend(self.decoder.layers());
        save_layers(path, &layers)?;
        Ok(())
    }

    /// The checkpoint stores layers only, so β comes from the caller.
    pub fn load(path: &Path, beta: f32) -> Result<Self, AgentError> {
        let arch = |m: String| AgentError::Checkpoint(sfc_nn::CheckpointError::Architecture(m));
        let layers = load_layers(path)?;
        // The encoder ends at the first linear layer, whose width is twice the decoder's input.
        let split = (0..layers.len().saturating_sub(1))
            .find(|&i| layers[i].activation == Activation::Linear && layers[i].output_dim() == 2 * layers[i + 1].input_dim())
            .ok_or_else(|| arch("no encoder head".into()))?
            + 1;
        let mut encoder_layers = layers;
        let decoder_layers = encoder_layers.split_off(split);
        let encoder = Mlp::from_layers(encoder_layers).map_err(|e| arch(e.to_string()))?;
        let decoder = Mlp::from_layers(decoder_layers).map_err(|e| arch(e.to_string()))?;
        if encoder.input_dim() != DC_STATE_DIM
            || decoder.output_dim() != DC_STATE_DIM
            || encoder.output_dim() != 2 * decoder.input_dim()
        {
            return Err(arch("encoder/decoder dimensions do not match a DC-state VAE".into()));
        }
        Ok(Self { encoder, decoder, beta })
    }
}

impl Module for Vae {
    fn params(&self) -> Vec<&[f32]> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f32]> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    fn layers(&self) -> Vec<&DenseLayer> {
        let mut l = self.encoder.layers();
        l.extend(self.decoder.layers());
        l
    }
}

pub(crate) fn matrices(rows: &[TransitionRow]) -> Result<(Matrix, Matrix), AgentError> {
    let s = Matrix::from_rows(&rows.iter().map(|r| r.state).collect::<Vec<_>>())?;
    let t = Matrix::from_rows(&rows.iter().map(|r| r.next_state).collect::<Vec<_>>())?;
    Ok((s, t))
}

/// `(total, recon, kl)` for one batch with explicit noise.
pub fn vae_loss(model: &Vae, state: &Matrix, next: &Matrix, noise: &Matrix) -> Result<(f32, f32, f32), AgentError> {
    let (l, _) = model.loss_and_grads(state, next, noise)?;
    Ok((l.total, l.recon, l.kl))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeEpoch {
    pub epoch: usize,
    pub train_recon: f64,
    pub train_kl: f64,
    pub heldout_recon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeCurve {
    pub initial_heldout_recon: f64,
    pub epochs: Vec<VaeEpoch>,
}

impl VaeCurve {
    pub fn final_heldout_recon(&self) -> f64 {
        self.epochs.last().map_or(self.initial_heldout_recon, |e| e.heldout_recon)
    }
}

/// Mini-batch training on `train`, reporting held-out reconstruction after every epoch.
pub fn train_vae<R: Rng + ?Sized>(
    model: &mut Vae,
    train: &[TransitionRow],
    heldout: &[TransitionRow],
    epochs: usize,
    batch_size: usize,
    adam: &mut Adam,
    rng: &mut R,
) -> Result<VaeCurve, AgentError> {
    if train.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let l = model.latent();
    let mut curve = VaeCurve {
        initial_heldout_recon: model.recon_error(heldout)?,
        epochs: Vec::new(),
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(rng);
        let (mut recon, mut kl) = (0.0, 0.0);
        for chunk in order.chunks(batch_size.max(1)) {
            let rows: Vec<TransitionRow> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (s, t) = matrices(&rows)?;
            let noise: Vec<f32> = (0..rows.len() * l).map(|_| rng.sample(StandardNormal)).collect();
            let noise = Matrix::from_vec(rows.len(), l, noise)?;
            let (loss, grads) = model.loss_and_grads(&s, &t, &noise)?;
            if !loss.total.is_finite() {
                return Err(AgentError::Diverged { epoch });
            }
            adam.step(model, &grads)?;
            recon += loss.recon as f64 * rows.len() as f64;
            kl += loss.kl as f64 * rows.len() as f64;
        }
        let heldout_recon = model.recon_error(heldout)?;
        if !heldout_recon.is_finite() {
            return Err(AgentError::Diverged { epoch });
        }
        curve.epochs.push(VaeEpoch {
            epoch,
            train_recon: recon / train.len() as f64,
            train_kl: kl / train.len() as f64,
            heldout_recon,
        });
    }
    Ok(curve)
}
