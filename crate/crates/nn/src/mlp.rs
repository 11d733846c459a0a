use crate::dense::{Activation, DenseCache, DenseLayer};
use crate::matrix::Matrix;
use crate::{Grads, Module, NnError};
use rand::Rng;

/// Stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    caches: Vec<DenseCache>,
}

impl MlpCache {
    pub fn output(&self) -> &Matrix {
        &self.caches.last().expect("non-empty stack").output
    }
}

impl Mlp {
    /// `dims = [in, h1, …, out]`; hidden layers use `hidden`, the last `output`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output width");
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                DenseLayer::new(dims[i], dims[i + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::ShapeMismatch {
                expected: "at least one layer".into(),
                got: "none".into(),
            });
        }
        for w in layers.windows(2) {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(NnError::ShapeMismatch {
                    expected: format!("input width {}", w[0].output_dim()),
                    got: format!("{}", w[1].input_dim()),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty stack").output_dim()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix, NnError> {
        let mut h = self.layers[0].forward(x)?;
        for l in &self.layers[1..] {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    pub fn forward_train(&self, x: &Matrix) -> Result<MlpCache, NnError> {
        let mut caches: Vec<DenseCache> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let input = caches.last().map_or(x, |c| &c.output);
            let c = l.forward_train(input)?;
            caches.push(c);
        }
        Ok(MlpCache { caches })
    }

    /// Input gradient and per-layer `[dW, db]` pairs, flattened in layer order.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Matrix) -> Result<(Matrix, Grads), NnError> {
        let mut g = grad_out.clone();
        let mut per_layer = Vec::with_capacity(self.layers.len());
        for (l, c) in self.layers.iter().zip(&cache.caches).rev() {
            let (gx, gp) = l.backward(c, &g)?;
            per_layer.push(gp);
            g = gx;
        }
        Ok((g, per_layer.into_iter().rev().flatten().collect()))
    }
}

impl Module for Mlp {
    fn params(&self) -> Vec<&[f32]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f32]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    fn layers(&self) -> Vec<&DenseLayer> {
        self.layers.iter().collect()
    }
}
