//! Finite-difference checks against an independent f64 re-implementation of
//! every layer's forward pass. The analytic side is the crate's f32 backward.
//! Shared by the crate's tests and the workspace acceptance suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfc_nn::{huber, kl_gaussian, mse, Activation, Attention, DenseLayer, Matrix, Mlp, Module};

pub const H: f64 = 1e-4;
pub const TOL: f64 = 1e-3;
pub const SEEDS: u64 = 20;

/// Coordinates compared, and coordinates skipped at a relu kink.
pub type Tally = (usize, usize);

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

fn act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => z.max(0.0),
        Activation::Linear => z,
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
    }
}

/// Reference dense forward: `w` is out × in row-major.
fn ref_dense(w: &[f64], b: &[f64], a: Activation, x: &[f64], n_in: usize) -> Vec<f64> {
    let n_out = b.len();
    let batch = x.len() / n_in;
    let mut y = Vec::with_capacity(batch * n_out);
    for s in 0..batch {
        for o in 0..n_out {
            let z: f64 = (0..n_in).map(|i| w[o * n_in + i] * x[s * n_in + i]).sum::<f64>() + b[o];
            y.push(act(a, z));
        }
    }
    y
}

fn ref_attention(p: &[Vec<f64>], x: &[f64], d: usize, t: usize) -> Vec<f64> {
    let rows = x.len() / d;
    let q = ref_dense(&p[0], &p[1], Activation::Linear, x, d);
    let k = ref_dense(&p[2], &p[3], Activation::Linear, x, d);
    let v = ref_dense(&p[4], &p[5], Activation::Linear, x, d);
    let mut out = vec![0.0; rows * d];
    for s in 0..rows / t {
        for i in 0..t {
            let qi = &q[(s * t + i) * d..(s * t + i + 1) * d];
            let scores: Vec<f64> = (0..t)
                .map(|j| {
                    let kj = &k[(s * t + j) * d..(s * t + j + 1) * d];
                    qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / (d as f64).sqrt()
                })
                .collect();
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            for j in 0..t {
                let w = scores[j].exp() / z;
                for c in 0..d {
                    out[(s * t + i) * d + c] += w * v[(s * t + j) * d + c];
                }
            }
        }
    }
    out
}

fn to64(xs: &[f32]) -> Vec<f64> {
    xs.iter().map(|&x| x as f64).collect()
}

fn random_vec(rng: &mut impl Rng, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Central difference, or `None` when the one-sided differences disagree,
/// meaning the step straddles a relu kink and the derivative is undefined.
fn numeric(f: impl Fn(f64) -> f64) -> Option<f64> {
    let (lo, mid, hi) = (f(-H), f(0.0), f(H));
    let (left, right) = ((mid - lo) / H, (hi - mid) / H);
    if rel_err(left, right) > 0.05 {
        return None;
    }
    Some((hi - lo) / (2.0 * H))
}

/// Compares analytic parameter and input gradients with central differences
/// of the reference `f`.
fn check<F>(label: &str, params: Vec<Vec<f64>>, input: Vec<f64>, analytic_params: &[Vec<f32>], analytic_input: &[f32], f: F) -> Result<Tally, String>
where
    F: Fn(&[Vec<f64>], &[f64]) -> f64,
{
    let (mut checked, mut skipped) = (0, 0);
    let mut failure = None;
    let mut compare = |what: String, analytic: f32, n: Option<f64>| match n {
        None => skipped += 1,
        Some(n) => {
            let e = rel_err(analytic as f64, n);
            if e >= TOL && failure.is_none() {
                failure = Some(format!("{label}: {what} analytic {analytic} numeric {n} rel {e}"));
            }
            checked += 1;
        }
    };
    for (t, tensor) in params.iter().enumerate() {
        for i in 0..tensor.len() {
            let n = numeric(|d| {
                let mut p = params.clone();
                p[t][i] += d;
                f(&p, &input)
            });
            compare(format!("param tensor {t}[{i}]"), analytic_params[t][i], n);
        }
    }
    for i in 0..input.len() {
        let n = numeric(|d| {
            let mut x = input.clone();
            x[i] += d;
            f(&params, &x)
        });
        compare(format!("input[{i}]"), analytic_input[i], n);
    }
    match failure {
        Some(f) => Err(f),
        None => Ok((checked, skipped)),
    }
}

/// Kinks must stay a rarity, otherwise the check proves nothing.
fn mostly_checked(label: &str, (checked, skipped): Tally) -> Result<Tally, String> {
    if checked == 0 {
        return Err(format!("{label}: nothing checked"));
    }
    if skipped * 50 > checked + skipped {
        return Err(format!("{label}: {skipped} of {} coordinates sat on kinks", checked + skipped));
    }
    Ok((checked, skipped))
}

fn smooth(label: &str, tally: Tally) -> Result<Tally, String> {
    if tally.1 > 0 {
        return Err(format!("{label}: {} kinks in a smooth function", tally.1));
    }
    Ok(tally)
}

fn add(a: Tally, b: Tally) -> Tally {
    (a.0 + b.0, a.1 + b.1)
}

fn projection_loss(y: &[f64], r: &[f64]) -> f64 {
    y.iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Dense layers with every activation.
pub fn dense_layers() -> Result<Tally, String> {
    let mut total = (0, 0);
    for a in [Activation::Relu, Activation::Linear, Activation::Sigmoid] {
        let mut tally = (0, 0);
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n_in, n_out, batch) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..4));
            let mut l = DenseLayer::new(n_in, n_out, a, &mut rng);
            l.bias = random_vec(&mut rng, n_out, 0.5);
            let x = Matrix::from_vec(batch, n_in, random_vec(&mut rng, batch * n_in, 1.5)).unwrap();
            let r = random_vec(&mut rng, batch * n_out, 1.0);
            let cache = l.forward_train(&x).unwrap();
            let (gx, gp) = l.backward(&cache, &Matrix::from_vec(batch, n_out, r.clone()).unwrap()).unwrap();
            let r64 = to64(&r);
            let c = check(
                &format!("dense {a:?} seed {seed}"),
                l.params().iter().map(|p| to64(p)).collect(),
                to64(x.data()),
                &gp,
                gx.data(),
                |p, x| projection_loss(&ref_dense(&p[0], &p[1], a, x, n_in), &r64),
            )?;
            tally = add(tally, c);
        }
        total = add(total, mostly_checked(&format!("dense {a:?}"), tally)?);
    }
    Ok(total)
}

/// Three-projection self-attention.
pub fn attention() -> Result<Tally, String> {
    let mut tally = (0, 0);
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (d, t, batch) = (rng.gen_range(1..5), rng.gen_range(2..4), rng.gen_range(1..3));
        let mut att = Attention::new(d, t, &mut rng);
        for l in [&mut att.query, &mut att.key, &mut att.value] {
            l.bias = random_vec(&mut rng, d, 0.3);
        }
        let x = Matrix::from_vec(batch, t * d, random_vec(&mut rng, batch * t * d, 1.5)).unwrap();
        let r = random_vec(&mut rng, batch * t * d, 1.0);
        let (_, cache) = att.forward_train(&x).unwrap();
        let (gx, gp) = att.backward(&cache, &Matrix::from_vec(batch, t * d, r.clone()).unwrap()).unwrap();
        let r64 = to64(&r);
        let c = check(
            &format!("attention seed {seed}"),
            att.params().iter().map(|p| to64(p)).collect(),
            to64(x.data()),
            &gp,
            gx.data(),
            |p, x| projection_loss(&ref_attention(p, x, d, t), &r64),
        )?;
        tally = add(tally, c);
    }
    smooth("attention", tally)
}

/// A relu/sigmoid stack under MSE.
pub fn stacked_network() -> Result<Tally, String> {
    let mut tally = (0, 0);
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let dims = [rng.gen_range(2..5), rng.gen_range(2..6), rng.gen_range(2..6), rng.gen_range(1..4)];
        let mut mlp = Mlp::new(&dims, Activation::Relu, Activation::Sigmoid, &mut rng);
        for l in &mut mlp.layers {
            l.bias = random_vec(&mut rng, l.output_dim(), 0.5);
        }
        let batch = 2;
        let x = Matrix::from_vec(batch, dims[0], random_vec(&mut rng, batch * dims[0], 1.0)).unwrap();
        let target = random_vec(&mut rng, batch * dims[3], 1.0);
        let cache = mlp.forward_train(&x).unwrap();
        let (_, g) = mse(cache.output().data(), &target).unwrap();
        let (gx, gp) = mlp.backward(&cache, &Matrix::from_vec(batch, dims[3], g).unwrap()).unwrap();
        let t64 = to64(&target);
        let acts: Vec<Activation> = mlp.layers.iter().map(|l| l.activation).collect();
        let widths: Vec<usize> = mlp.layers.iter().map(|l| l.input_dim()).collect();
        let c = check(
            &format!("mlp seed {seed}"),
            mlp.params().iter().map(|p| to64(p)).collect(),
            to64(x.data()),
            &gp,
            gx.data(),
            |p, x| {
                let mut h = x.to_vec();
                for (i, (&a, &w)) in acts.iter().zip(&widths).enumerate() {
                    h = ref_dense(&p[2 * i], &p[2 * i + 1], a, &h, w);
                }
                h.iter().zip(&t64).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / h.len() as f64
            },
        )?;
        tally = add(tally, c);
    }
    mostly_checked("mlp", tally)
}

/// MSE, Huber and Gaussian KL.
pub fn losses() -> Result<Tally, String> {
    let mut total = (0, 0);
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let n = rng.gen_range(1..8);
        let pred = random_vec(&mut rng, n, 3.0);
        let target = random_vec(&mut rng, n, 3.0);
        let t64 = to64(&target);

        let (_, g) = mse(&pred, &target).unwrap();
        let c = check("mse", vec![], to64(&pred), &[], &g, |_, p| {
            p.iter().zip(&t64).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64
        })?;
        total = add(total, smooth("mse", c)?);

        let (_, g) = huber(&pred, &target).unwrap();
        let c = check("huber", vec![], to64(&pred), &[], &g, |_, p| {
            p.iter()
                .zip(&t64)
                .map(|(a, b)| {
                    let r = (a - b).abs();
                    if r <= 1.0 {
                        0.5 * r * r
                    } else {
                        r - 0.5
                    }
                })
                .sum::<f64>()
                / p.len() as f64
        })?;
        total = add(total, mostly_checked("huber", c)?);

        let mu = random_vec(&mut rng, n, 2.0);
        let lv = random_vec(&mut rng, n, 2.0);
        let (kl, g_mu, g_lv) = kl_gaussian(&mu, &lv).unwrap();
        let kl_ref = |m: &[f64], l: &[f64]| 0.5 * m.iter().zip(l).map(|(m, l)| m * m + l.exp() - 1.0 - l).sum::<f64>();
        if rel_err(kl as f64, kl_ref(&to64(&mu), &to64(&lv))) >= 1e-5 {
            return Err(format!("kl value {kl} disagrees with the reference"));
        }
        let lv64 = to64(&lv);
        let c = check("kl mu", vec![], to64(&mu), &[], &g_mu, |_, m| kl_ref(m, &lv64))?;
        total = add(total, smooth("kl mu", c)?);
        let mu64 = to64(&mu);
        let c = check("kl logvar", vec![], to64(&lv), &[], &g_lv, |_, l| kl_ref(&mu64, l))?;
        total = add(total, smooth("kl logvar", c)?);
    }
    Ok(total)
}
