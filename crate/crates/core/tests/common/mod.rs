//! Reference implementations used as test oracles. They are deliberately
//! naive and share no code with the library.

#![allow(dead_code)]

pub mod criteria;
pub mod gradcheck;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> Array2<f64> {
    let a = random_matrix(rng, n, n);
    (&a + &a.t()) * 0.5
}

/// Plain triple-loop product.
pub fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, k) = a.dim();
    let m = b.ncols();
    assert_eq!(k, b.nrows());
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[[i, t]] * b[[t, j]];
            }
            out[[i, j]] = s;
        }
    }
    out
}

pub fn transpose(a: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.ncols(), a.nrows()), |(i, j)| a[[j, i]])
}

pub fn centering(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64)
}

pub fn trace(a: &Array2<f64>) -> f64 {
    (0..a.nrows()).map(|i| a[[i, i]]).sum()
}

pub fn gaussian(x: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let d2: f64 = (0..x.ncols()).map(|k| (x[[i, k]] - x[[j, k]]).powi(2)).sum();
        (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Cyclic Jacobi eigendecomposition; eigenvalues descending, eigenvectors in columns.
pub fn jacobi_eigen(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let vals = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let vecs = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    (vals, vecs)
}

/// Gram–Schmidt orthonormalization of a Gaussian matrix: a random Stiefel point.
pub fn random_stiefel<R: Rng>(rng: &mut R, n: usize, c: usize) -> Array2<f64> {
    let mut q = random_matrix(rng, n, c);
    for j in 0..c {
        for _ in 0..2 {
            for k in 0..j {
                let dot: f64 = (0..n).map(|i| q[[i, j]] * q[[i, k]]).sum();
                for i in 0..n {
                    q[[i, j]] -= dot * q[[i, k]];
                }
            }
        }
        let norm: f64 = (0..n).map(|i| q[[i, j]].powi(2)).sum::<f64>().sqrt();
        for i in 0..n {
            q[[i, j]] /= norm;
        }
    }
    q
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn inverse(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs())).unwrap();
        for k in 0..n {
            a.swap([col, k], [piv, k]);
            inv.swap([col, k], [piv, k]);
        }
        let d = a[[col, col]];
        for k in 0..n {
            a[[col, k]] /= d;
            inv[[col, k]] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[[r, col]];
                for k in 0..n {
                    a[[r, k]] -= f * a[[col, k]];
                    inv[[r, k]] -= f * inv[[col, k]];
                }
            }
        }
    }
    inv
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn orthonormality_drift(u: &Array2<f64>) -> f64 {
    let g = matmul(&transpose(u), u);
    max_abs_diff(&g, &Array2::eye(u.ncols()))
}
