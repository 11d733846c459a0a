use crate::{Module, NnError};

/// Bias-corrected Adam. Moment buffers are allocated on the first step.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(lr: f32) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step<M: Module + ?Sized>(&mut self, module: &mut M, grads: &[Vec<f32>]) -> Result<(), NnError> {
        let mut params = module.params_mut();
        let shapes_ok = params.len() == grads.len() && params.iter().zip(grads).all(|(p, g)| p.len() == g.len());
        if !shapes_ok {
            return Err(NnError::ShapeMismatch {
                expected: format!("{:?}", params.iter().map(|p| p.len()).collect::<Vec<_>>()),
                got: format!("{:?}", grads.iter().map(|g| g.len()).collect::<Vec<_>>()),
            });
        }
        if grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite);
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != grads.len() || self.m.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
            return Err(NnError::ShapeMismatch {
                expected: "the shapes seen on the first step".into(),
                got: format!("{:?}", grads.iter().map(|g| g.len()).collect::<Vec<_>>()),
            });
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
