//! Finite-difference check of the training-loss gradients against an
//! independently written forward pass and loss.

#![allow(dead_code)]

use knet::hsic::gamma_matrix;
use knet::kernel::{degree_matrix, gaussian_kernel, Bandwidth};
use knet::network::{loss_and_grad, BatchObjective, Mlp};
use knet::spectral::{laplacian, top_eigenvectors};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::random_matrix;

/// Layer-by-layer forward pass written out with explicit loops.
pub fn naive_forward(net: &Mlp, x: &Array2<f64>) -> Array2<f64> {
    let mut a = x.clone();
    let last = net.layers().len() - 1;
    for (l, layer) in net.layers().iter().enumerate() {
        let (fan_in, fan_out) = layer.weight.dim();
        let mut next = Array2::zeros((a.nrows(), fan_out));
        for r in 0..a.nrows() {
            for o in 0..fan_out {
                let mut s = layer.bias[o];
                for i in 0..fan_in {
                    s += a[[r, i]] * layer.weight[[i, o]];
                }
                next[[r, o]] = if l == last { s } else { s.tanh() };
            }
        }
        a = next;
    }
    a
}

/// The mini-batch loss with out-of-batch embeddings frozen at `z_cache`.
pub fn naive_loss(
    enc: &Mlp,
    dec: &Mlp,
    batch: &[usize],
    x: &Array2<f64>,
    gamma: &Array2<f64>,
    sigma: f64,
    lambda: f64,
    z_cache: &Array2<f64>,
) -> f64 {
    let n = x.nrows();
    let xb = x.select(ndarray::Axis(0), batch);
    let zb = naive_forward(enc, &xb);
    let mut z = z_cache.clone();
    for (p, &i) in batch.iter().enumerate() {
        z.row_mut(i).assign(&zb.row(p));
    }
    let scale = n as f64 / batch.len() as f64;
    let mut clump = 0.0;
    for &i in batch {
        for j in 0..n {
            let d2: f64 = (0..z.ncols()).map(|t| (z[[i, t]] - z[[j, t]]).powi(2)).sum();
            clump += gamma[[i, j]] * (-d2 / (2.0 * sigma * sigma)).exp();
        }
    }
    let f = naive_forward(dec, &zb);
    let recon: f64 = (&xb - &f).iter().map(|v| v * v).sum();
    -scale * clump + lambda * scale * recon
}

pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

pub struct Case {
    pub n: usize,
    pub widths: Vec<usize>,
    pub batch: Vec<usize>,
    pub lambda: f64,
    pub sigma: f64,
}

/// Largest relative error between analytic and central-difference gradients
/// over every encoder and decoder parameter.
pub fn check(case: &Case, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = case.widths[0];
    let x = random_matrix(&mut rng, case.n, d);
    let enc = Mlp::xavier(&case.widths, &mut rng).unwrap();
    let dec_widths: Vec<usize> = case.widths.iter().rev().copied().collect();
    let dec = Mlp::xavier(&dec_widths, &mut rng).unwrap();
    let sigma = Bandwidth::new(case.sigma).unwrap();
    // a realistic Γ: from the top eigenvectors and degrees of the embedded kernel
    let z0 = enc.forward(x.view()).unwrap();
    let k = gaussian_kernel(z0.view(), sigma).unwrap();
    let degree = degree_matrix(k.view()).unwrap();
    let l = laplacian(k.view(), &degree).unwrap();
    let u = top_eigenvectors(l.view(), 1).unwrap();
    let gamma = gamma_matrix(u.view(), &degree).unwrap();
    // cache deliberately differs from the current embedding for out-of-batch rows
    let z_cache = &z0 + &(random_matrix(&mut rng, case.n, z0.ncols()) * 0.1);

    let objective = BatchObjective {
        x: x.view(),
        gamma: gamma.view(),
        sigma,
        lambda: case.lambda,
    };
    let lg = loss_and_grad(&enc, &dec, &case.batch, &objective, z_cache.view()).unwrap();
    let direct = naive_loss(&enc, &dec, &case.batch, &x, &gamma, case.sigma, case.lambda, &z_cache);
    assert!((lg.loss - direct).abs() <= 1e-10 * direct.abs().max(1.0));

    let h = 1e-5;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for which in 0..2 {
        let count = if which == 0 { enc.num_params() } else { dec.num_params() };
        for p in 0..count {
            let eval = |delta: f64| {
                let mut e = enc.clone();
                let mut dd = dec.clone();
                let target = if which == 0 { &mut e } else { &mut dd };
                *target.params_mut().nth(p).unwrap() += delta;
                naive_loss(&e, &dd, &case.batch, &x, &gamma, case.sigma, case.lambda, &z_cache)
            };
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
            let g = if which == 0 { &lg.encoder } else { &lg.decoder };
            analytic.push(*g.params().nth(p).unwrap());
        }
    }
    max_rel_error(&analytic, &numeric)
}

/// The layer shapes, batches and λ values exercised by the gradient suite,
/// each with the seeds it is checked under.
pub fn standard_cases() -> Vec<(Case, Vec<u64>)> {
    vec![
        (Case { n: 4, widths: vec![2, 3, 2], batch: vec![0, 1, 2, 3], lambda: 0.0, sigma: 1.0 }, (0..5).collect()),
        (Case { n: 6, widths: vec![2, 4, 4, 4, 2], batch: vec![4, 1], lambda: 0.5, sigma: 0.8 }, (100..103).collect()),
        (Case { n: 8, widths: vec![3, 3, 3], batch: vec![0, 5, 7], lambda: 1.0, sigma: 1.5 }, (100..103).collect()),
        (Case { n: 5, widths: vec![4, 6, 4], batch: vec![2], lambda: 1e-2, sigma: 1.0 }, (100..103).collect()),
        (Case { n: 10, widths: vec![2, 20, 20, 20, 2], batch: vec![9, 3, 4, 0, 6], lambda: 0.0, sigma: 0.5 }, (200..202).collect()),
    ]
}
