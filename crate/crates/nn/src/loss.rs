//! Losses return the scalar value together with its gradient.

use crate::NnError;

fn same_len(a: &[f32], b: &[f32]) -> Result<(), NnError> {
    if a.len() != b.len() {
        return Err(NnError::ShapeMismatch {
            expected: format!("{} values", a.len()),
            got: format!("{} values", b.len()),
        });
    }
    Ok(())
}

/// Mean squared error over all elements.
pub fn mse(pred: &[f32], target: &[f32]) -> Result<(f32, Vec<f32>), NnError> {
    same_len(pred, target)?;
    let n = pred.len().max(1) as f32;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let r = p - t;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Mean Huber loss with threshold 1.
pub fn huber(pred: &[f32], target: &[f32]) -> Result<(f32, Vec<f32>), NnError> {
    same_len(pred, target)?;
    let n = pred.len().max(1) as f32;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let r = p - t;
            if r.abs() <= 1.0 {
                loss += 0.5 * r * r;
                r / n
            } else {
                loss += r.abs() - 0.5;
                r.signum() / n
            }
        })
        .collect();
    Ok((loss / n, grad))
}

/// `½ Σ (μ² + e^{logvar} − 1 − logvar)` and its gradients w.r.t. μ and logvar.
pub fn kl_gaussian(mu: &[f32], logvar: &[f32]) -> Result<(f32, Vec<f32>, Vec<f32>), NnError> {
    same_len(mu, logvar)?;
    let mut kl = 0.0;
    let mut g_lv = Vec::with_capacity(logvar.len());
    for (m, lv) in mu.iter().zip(logvar) {
        let e = lv.exp();
        kl += m * m + e - 1.0 - lv;
        g_lv.push(0.5 * (e - 1.0));
    }
    Ok((0.5 * kl, mu.to_vec(), g_lv))
}

/// `z = μ + e^{logvar/2} ⊙ noise`
pub fn reparameterize(mu: &[f32], logvar: &[f32], noise: &[f32]) -> Result<Vec<f32>, NnError> {
    same_len(mu, logvar)?;
    same_len(mu, noise)?;
    Ok(mu
        .iter()
        .zip(logvar)
        .zip(noise)
        .map(|((m, lv), n)| m + (0.5 * lv).exp() * n)
        .collect())
}
