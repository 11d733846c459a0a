use crate::dense::{Activation, DenseCache, DenseLayer};
use crate::matrix::{dot, Matrix};
use crate::{Grads, Module, NnError};
use rand::Rng;

/// Single-head scaled dot-product self-attention over a fixed number of
/// equal-width tokens. A batch row holds the tokens concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub query: DenseLayer,
    pub key: DenseLayer,
    pub value: DenseLayer,
    pub tokens: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    q: DenseCache,
    k: DenseCache,
    v: DenseCache,
    /// Attention weights, one `tokens × tokens` block per sample.
    weights: Vec<f32>,
    batch: usize,
}

impl Attention {
    pub fn new<R: Rng + ?Sized>(width: usize, tokens: usize, rng: &mut R) -> Self {
        Self {
            query: DenseLayer::new(width, width, Activation::Linear, rng),
            key: DenseLayer::new(width, width, Activation::Linear, rng),
            value: DenseLayer::new(width, width, Activation::Linear, rng),
            tokens,
        }
    }

    pub fn from_layers(query: DenseLayer, key: DenseLayer, value: DenseLayer, tokens: usize) -> Result<Self, NnError> {
        let w = query.input_dim();
        for l in [&query, &key, &value] {
            if l.input_dim() != w || l.output_dim() != w || l.activation != Activation::Linear {
                return Err(NnError::ShapeMismatch {
                    expected: format!("linear {w}x{w} projections"),
                    got: format!("{}x{} {:?}", l.output_dim(), l.input_dim(), l.activation),
                });
            }
        }
        Ok(Self {
            query,
            key,
            value,
            tokens,
        })
    }

    pub fn width(&self) -> usize {
        self.query.input_dim()
    }

    fn tokens_of(&self, x: &Matrix) -> Result<Matrix, NnError> {
        if x.cols() != self.tokens * self.width() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} columns ({} tokens of {})", self.tokens * self.width(), self.tokens, self.width()),
                got: format!("{}", x.cols()),
            });
        }
        x.clone().reshape(x.rows() * self.tokens, self.width())
    }

    fn mix(&self, q: &Matrix, k: &Matrix, v: &Matrix, batch: usize) -> (Matrix, Vec<f32>) {
        let (t, d) = (self.tokens, self.width());
        let scale = 1.0 / (d as f32).sqrt();
        let mut out = Matrix::zeros(batch, t * d);
        let mut weights = vec![0.0f32; batch * t * t];
        for b in 0..batch {
            for i in 0..t {
                let a = &mut weights[(b * t + i) * t..(b * t + i + 1) * t];
                for (j, s) in a.iter_mut().enumerate() {
                    *s = dot(q.row(b * t + i), k.row(b * t + j)) * scale;
                }
                let m = a.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let mut z = 0.0;
                for s in a.iter_mut() {
                    *s = (*s - m).exp();
                    z += *s;
                }
                for s in a.iter_mut() {
                    *s /= z;
                }
                let o = &mut out.row_mut(b)[i * d..(i + 1) * d];
                for (j, &w) in a.iter().enumerate() {
                    for (oc, vc) in o.iter_mut().zip(v.row(b * t + j)) {
                        *oc += w * vc;
                    }
                }
            }
        }
        (out, weights)
    }

    /// `softmax(Q Kᵀ / √d) V` per sample; output has the input's shape.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix, NnError> {
        let xt = self.tokens_of(x)?;
        let q = self.query.forward(&xt)?;
        let k = self.key.forward(&xt)?;
        let v = self.value.forward(&xt)?;
        Ok(self.mix(&q, &k, &v, x.rows()).0)
    }

    pub fn forward_train(&self, x: &Matrix) -> Result<(Matrix, AttentionCache), NnError> {
        let xt = self.tokens_of(x)?;
        let q = self.query.forward_train(&xt)?;
        let k = self.key.forward_train(&xt)?;
        let v = self.value.forward_train(&xt)?;
        let (out, weights) = self.mix(&q.output, &k.output, &v.output, x.rows());
        Ok((
            out,
            AttentionCache {
                q,
                k,
                v,
                weights,
                batch: x.rows(),
            },
        ))
    }

    /// Input gradient and `[dWq, dbq, dWk, dbk, dWv, dbv]`.
    pub fn backward(&self, cache: &AttentionCache, grad_out: &Matrix) -> Result<(Matrix, Grads), NnError> {
        let (t, d, batch) = (self.tokens, self.width(), cache.batch);
        if grad_out.shape() != (batch, t * d) {
            return Err(NnError::ShapeMismatch {
                expected: format!("{:?}", (batch, t * d)),
                got: format!("{:?}", grad_out.shape()),
            });
        }
        let scale = 1.0 / (d as f32).sqrt();
        let (q, k, v) = (&cache.q.output, &cache.k.output, &cache.v.output);
        let mut dq = Matrix::zeros(batch * t, d);
        let mut dk = Matrix::zeros(batch * t, d);
        let mut dv = Matrix::zeros(batch * t, d);
        let mut da = vec![0.0f32; t];
        for b in 0..batch {
            let go = grad_out.row(b);
            for i in 0..t {
                let a = &cache.weights[(b * t + i) * t..(b * t + i + 1) * t];
                let goi = &go[i * d..(i + 1) * d];
                for j in 0..t {
                    da[j] = dot(goi, v.row(b * t + j));
                    for (x, g) in dv.row_mut(b * t + j).iter_mut().zip(goi) {
                        *x += a[j] * g;
                    }
                }
                let centre = dot(a, &da);
                for j in 0..t {
                    let ds = a[j] * (da[j] - centre) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for (x, kc) in dq.row_mut(b * t + i).iter_mut().zip(k.row(b * t + j)) {
                        *x += ds * kc;
                    }
                    for (x, qc) in dk.row_mut(b * t + j).iter_mut().zip(q.row(b * t + i)) {
                        *x += ds * qc;
                    }
                }
            }
        }
        let (gxq, gq) = self.query.backward(&cache.q, &dq)?;
        let (gxk, gk) = self.key.backward(&cache.k, &dk)?;
        let (gxv, gv) = self.value.backward(&cache.v, &dv)?;
        let mut gx = gxq;
        for (x, (a, c)) in gx.data_mut().iter_mut().zip(gxk.data().iter().zip(gxv.data())) {
            *x += a + c;
        }
        let grads = gq.into_iter().chain(gk).chain(gv).collect();
        Ok((gx.reshape(batch, t * d)?, grads))
    }
}

impl Module for Attention {
    fn params(&self) -> Vec<&[f32]> {
        [&self.query, &self.key, &self.value].into_iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f32]> {
        let mut p = self.query.params_mut();
        p.extend(self.key.params_mut());
        p.extend(self.value.params_mut());
        p
    }

    fn layers(&self) -> Vec<&DenseLayer> {
        vec![&self.query, &self.key, &self.value]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn with_zero_query(width: usize, tokens: usize) -> Attention {
        let mut a = Attention::new(width, tokens, &mut ChaCha8Rng::seed_from_u64(9));
        a.query.weights.data_mut().fill(0.0);
        a
    }

    #[test]
    fn identical_tokens_return_their_value_projection() {
        let a = Attention::new(4, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let tok = [0.3, -1.0, 2.0, 0.5];
        let x = Matrix::row_vector(&tok.repeat(3));
        let y = a.forward(&x).unwrap();
        let v = a.value.forward(&Matrix::row_vector(&tok)).unwrap();
        for i in 0..3 {
            for c in 0..4 {
                assert!((y.get(0, i * 4 + c) - v.get(0, c)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn zero_query_gives_uniform_weights() {
        let a = with_zero_query(2, 3);
        let x = Matrix::row_vector(&[1.0, 2.0, -3.0, 0.5, 4.0, 1.0]);
        let (_, cache) = a.forward_train(&x).unwrap();
        for w in &cache.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn hand_computed_two_token_case() {
        // Identity projections, tokens (1,0) and (0,1):
        // scores row 0 = (1, 0)/√2, so weights (e^{1/√2}, 1)/Z.
        let id = || DenseLayer::from_parts(Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(), vec![0.0; 2], Activation::Linear).unwrap();
        let a = Attention::from_layers(id(), id(), id(), 2).unwrap();
        let y = a.forward(&Matrix::row_vector(&[1.0, 0.0, 0.0, 1.0])).unwrap();
        let e = (1.0f32 / 2.0f32.sqrt()).exp();
        let (hi, lo) = (e / (e + 1.0), 1.0 / (e + 1.0));
        let expect = [hi, lo, lo, hi];
        for (got, want) in y.data().iter().zip(expect) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_bad_token_layout() {
        let a = Attention::new(4, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(a.forward(&Matrix::zeros(1, 11)).is_err());
        let bad = DenseLayer::new(4, 3, Activation::Linear, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(Attention::from_layers(bad, a.key.clone(), a.value.clone(), 3).is_err());
    }
}
