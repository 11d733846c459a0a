use crate::matrix::{axpy, dot, Matrix};
use crate::{Grads, Module, NnError};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f32) -> f32 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Fully connected layer, `y = act(W x + b)` with `W` stored out × in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f32>,
    pub activation: Activation,
}

/// What a training forward pass keeps for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Matrix,
    pub output: Matrix,
}

impl DenseLayer {
    /// He-normal init for relu, Xavier-uniform otherwise; zero bias.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let n = input * output;
        let data: Vec<f32> = match activation {
            Activation::Relu => {
                let d = Normal::new(0.0, (2.0 / input as f32).sqrt()).expect("valid std");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Activation::Linear | Activation::Sigmoid => {
                let a = (6.0 / (input + output) as f32).sqrt();
                let d = Uniform::new_inclusive(-a, a);
                (0..n).map(|_| d.sample(rng)).collect()
            }
        };
        Self {
            weights: Matrix::from_vec(output, input, data).expect("sized above"),
            bias: vec![0.0; output],
            activation,
        }
    }

    pub fn from_parts(weights: Matrix, bias: Vec<f32>, activation: Activation) -> Result<Self, NnError> {
        if bias.len() != weights.rows() {
            return Err(NnError::ShapeMismatch {
                expected: format!("bias of {}", weights.rows()),
                got: format!("bias of {}", bias.len()),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    fn check_input(&self, x: &Matrix) -> Result<(), NnError> {
        if x.cols() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} input columns", self.input_dim()),
                got: format!("{}", x.cols()),
            });
        }
        Ok(())
    }

    /// Batch forward, one sample per row.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix, NnError> {
        self.check_input(x)?;
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        for b in 0..x.rows() {
            let xr = x.row(b);
            for (o, y) in out.row_mut(b).iter_mut().enumerate() {
                *y = self.activation.apply(dot(self.weights.row(o), xr) + self.bias[o]);
            }
        }
        Ok(out)
    }

    pub fn forward_train(&self, x: &Matrix) -> Result<DenseCache, NnError> {
        let output = self.forward(x)?;
        Ok(DenseCache {
            input: x.clone(),
            output,
        })
    }

    /// Gradient w.r.t. the input plus `[dW, db]`, given dLoss/dOutput.
    pub fn backward(&self, cache: &DenseCache, grad_out: &Matrix) -> Result<(Matrix, Grads), NnError> {
        if grad_out.shape() != cache.output.shape() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{:?}", cache.output.shape()),
                got: format!("{:?}", grad_out.shape()),
            });
        }
        let (batch, n_in, n_out) = (cache.input.rows(), self.input_dim(), self.output_dim());
        let mut gw = vec![0.0f32; n_in * n_out];
        let mut gb = vec![0.0f32; n_out];
        let mut gx = Matrix::zeros(batch, n_in);
        let mut delta = vec![0.0f32; n_out];
        for b in 0..batch {
            let y = cache.output.row(b);
            for o in 0..n_out {
                delta[o] = grad_out.get(b, o) * self.activation.derivative_from_output(y[o]);
            }
            let xr = cache.input.row(b);
            let gxr = gx.row_mut(b);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                axpy(&mut gw[o * n_in..(o + 1) * n_in], d, xr);
                axpy(gxr, d, self.weights.row(o));
            }
        }
        Ok((gx, vec![gw, gb]))
    }
}

impl Module for DenseLayer {
    fn params(&self) -> Vec<&[f32]> {
        vec![self.weights.data(), &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f32]> {
        vec![self.weights.data_mut(), &mut self.bias]
    }

    fn layers(&self) -> Vec<&DenseLayer> {
        vec![self]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(w: Vec<f32>, rows: usize, cols: usize, b: Vec<f32>, a: Activation) -> DenseLayer {
        DenseLayer::from_parts(Matrix::from_vec(rows, cols, w).unwrap(), b, a).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let l = layer(vec![1.0, 0.0, 0.0, 1.0], 2, 2, vec![0.0, 0.0], Activation::Linear);
        let x = Matrix::row_vector(&[3.5, -2.0]);
        assert_eq!(l.forward(&x).unwrap(), x);
    }

    #[test]
    fn relu_of_negative_preactivations_is_zero() {
        let l = layer(vec![1.0, 1.0], 2, 1, vec![-1.0, -5.0], Activation::Relu);
        let y = l.forward(&Matrix::row_vector(&[-2.0])).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0]);
    }

    #[test]
    fn scalar_arithmetic() {
        let l = layer(vec![2.0], 1, 1, vec![1.0], Activation::Linear);
        assert_eq!(l.forward(&Matrix::row_vector(&[3.0])).unwrap().data(), &[7.0]);
    }

    #[test]
    fn rejects_wrong_width() {
        let l = layer(vec![2.0], 1, 1, vec![1.0], Activation::Linear);
        assert!(matches!(l.forward(&Matrix::row_vector(&[1.0, 2.0])), Err(NnError::ShapeMismatch { .. })));
    }

    #[test]
    fn linear_mse_gradient_closed_form() {
        // L = (Wx + b - y)^2, dL/dW = 2(Wx + b - y) x^T
        let l = layer(vec![0.5, -1.0], 1, 2, vec![0.25], Activation::Linear);
        let x = Matrix::row_vector(&[2.0, 3.0]);
        let target = 1.0;
        let cache = l.forward_train(&x).unwrap();
        let r = cache.output.get(0, 0) - target;
        let (_, g) = l.backward(&cache, &Matrix::row_vector(&[2.0 * r])).unwrap();
        assert_eq!(g[0], vec![2.0 * r * 2.0, 2.0 * r * 3.0]);
        assert_eq!(g[1], vec![2.0 * r]);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = DenseLayer::new(4, 3, Activation::Sigmoid, &mut rng);
        let cache = l.forward_train(&Matrix::from_vec(2, 4, vec![0.3; 8]).unwrap()).unwrap();
        let (gx, g) = l.backward(&cache, &Matrix::zeros(2, 3)).unwrap();
        assert!(gx.data().iter().chain(g.iter().flatten()).all(|&v| v == 0.0));
    }

    #[test]
    fn init_is_seeded() {
        let a = DenseLayer::new(5, 4, Activation::Relu, &mut ChaCha8Rng::seed_from_u64(3));
        let b = DenseLayer::new(5, 4, Activation::Relu, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!(a.weights.is_finite());
    }

    #[test]
    fn activation_codes_roundtrip() {
        for a in [Activation::Relu, Activation::Linear, Activation::Sigmoid] {
            assert_eq!(Activation::from_code(a.code()), Some(a));
        }
        assert_eq!(Activation::from_code(9), None);
    }
}
