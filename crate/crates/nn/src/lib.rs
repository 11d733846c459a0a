//! Minimal neural toolkit for the provisioning agents.
//!
//! Everything is `f32`, row-major, batch-first. Layers expose a cached
//! forward pass and an exact backward pass; gradients come back as one
//! buffer per parameter tensor in [`Module::params`] order so that [`Adam`]
//! can consume them directly.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod dense;
pub mod loss;
pub mod matrix;
pub mod mlp;

pub use adam::Adam;
pub use attention::{Attention, AttentionCache};
pub use checkpoint::{load_layers, read_layers, save_layers, write_layers, CheckpointError};
pub use dense::{Activation, DenseCache, DenseLayer};
pub use loss::{huber, kl_gaussian, mse, reparameterize};
pub use matrix::Matrix;
pub use mlp::{Mlp, MlpCache};

/// Gradients, one buffer per parameter tensor.
pub type Grads = Vec<Vec<f32>>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite value encountered")]
    NonFinite,
}

/// Anything with trainable parameters.
pub trait Module {
    fn params(&self) -> Vec<&[f32]>;
    fn params_mut(&mut self) -> Vec<&mut [f32]>;

    /// Dense layers in checkpoint order.
    fn layers(&self) -> Vec<&DenseLayer>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Zero-filled gradient buffers matching [`Module::params`].
    fn zero_grads(&self) -> Grads {
        self.params().iter().map(|p| vec![0.0; p.len()]).collect()
    }

    /// Hard copy of every parameter from `other`, which must share the architecture.
    fn copy_from(&mut self, other: &Self) -> Result<(), NnError>
    where
        Self: Sized,
    {
        let src = other.params();
        let mut dst = self.params_mut();
        if src.len() != dst.len() || src.iter().zip(&dst).any(|(a, b)| a.len() != b.len()) {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} tensors", dst.len()),
                got: format!("{} tensors", src.len()),
            });
        }
        for (d, s) in dst.iter_mut().zip(src) {
            d.copy_from_slice(s);
        }
        Ok(())
    }
}

/// Adds `src` into `dst` element-wise; shapes must already agree.
pub fn accumulate(dst: &mut Grads, src: &Grads) {
    for (d, s) in dst.iter_mut().zip(src) {
        for (a, b) in d.iter_mut().zip(s) {
            *a += b;
        }
    }
}
