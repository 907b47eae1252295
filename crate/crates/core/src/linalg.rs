//! Dense linear-algebra kernels shared by the spectral, stiefel and data modules.
//!
//! Matrices live in `ndarray` everywhere in the crate; the factorizations are
//! delegated to `faer` and copied back.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::matrix_free::eigen::{
    partial_self_adjoint_eigen, partial_self_adjoint_eigen_scratch, PartialEigenParams,
};
use faer::prelude::*;
use faer::{Mat, Side};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{KnetError, Result};

pub(crate) fn to_faer(m: ArrayView2<'_, f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub(crate) fn from_faer(m: faer::MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come back in descending order; column `k` of the second
/// element is the eigenvector of the `k`-th value.
pub fn symmetric_eigen(m: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = m.nrows();
    let evd = to_faer(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| KnetError::Eigen(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let values = Array1::from_shape_fn(n, |k| s[n - 1 - k]);
    let vectors = Array2::from_shape_fn((n, n), |(i, k)| u[(i, n - 1 - k)]);
    Ok((values, vectors))
}

/// Top-`count` eigenpairs of a symmetric matrix via restarted Lanczos
/// (Krylov–Schur) on `m + shift·I`, where `shift` bounds the spectrum from
/// below so that largest-magnitude equals algebraically largest.
///
/// Returns `None` when the iteration does not converge every requested pair;
/// callers then fall back to [`symmetric_eigen`].
pub fn symmetric_top_eigen_krylov(
    m: ArrayView2<'_, f64>,
    count: usize,
    start: Option<ArrayView2<'_, f64>>,
) -> Option<(Array1<f64>, Array2<f64>)> {
    let n = m.nrows();
    if count == 0 || count >= n {
        return None;
    }
    // Gershgorin bound on the spectral radius.
    let radius = m
        .axis_iter(Axis(0))
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut shifted = to_faer(m);
    for i in 0..n {
        shifted[(i, i)] += radius;
    }

    let mut v0 = Col::<f64>::from_fn(n, |i| 1.0 + ((i * 7919) % 104_729) as f64 / 104_729.0);
    if let Some(s) = start {
        for i in 0..n {
            v0[i] += s.row(i).sum();
        }
    }
    let norm = v0.norm_l2();
    v0 /= norm;

    let params = PartialEigenParams {
        min_dim: (2 * count + 8).min(n),
        max_dim: (4 * count + 32).min(n),
        max_restarts: 2000,
        ..Default::default()
    };
    let par = Par::Seq;
    let mut mem =
        MemBuffer::new(partial_self_adjoint_eigen_scratch(&shifted, count, par, params));
    let mut vecs = Mat::<f64>::zeros(n, count);
    let mut vals = vec![0.0; count];
    let info = partial_self_adjoint_eigen(
        vecs.as_mut(),
        &mut vals,
        &shifted,
        v0.as_ref(),
        f64::EPSILON * 128.0,
        par,
        MemStack::new(&mut mem),
        params,
    );
    if info.n_converged_eigen < count {
        return None;
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let values = Array1::from_iter(order.iter().map(|&k| vals[k] - radius));
    let vectors = Array2::from_shape_fn((n, count), |(i, k)| vecs[(i, order[k])]);
    Some((values, vectors))
}

/// Solves `a · x = b` by partially pivoted LU.
///
/// A pivot whose magnitude falls below `1e-14` times the largest pivot is
/// treated as singular.
pub fn solve(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(KnetError::Shape(format!(
            "solve: lhs {:?}, rhs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let lu = to_faer(a).partial_piv_lu();
    let u = lu.U();
    let n = a.nrows();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
    let max_pivot = pivots.iter().cloned().fold(0.0, f64::max);
    let min_pivot = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max_pivot > 0.0) || !(min_pivot > 1e-14 * max_pivot) {
        return Err(KnetError::StepFailure(format!(
            "singular system (pivot ratio {:.3e})",
            if max_pivot > 0.0 { min_pivot / max_pivot } else { 0.0 }
        )));
    }
    let x = lu.solve(to_faer(b));
    Ok(from_faer(x.as_ref()))
}

/// Thin QR orthonormalization: returns `Q` (same shape as `m`) with the sign of
/// each column chosen so that `R` has a non-negative diagonal.
pub fn thin_q(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let qr = to_faer(m).qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let mut out = from_faer(q.as_ref());
    for k in 0..out.ncols() {
        if r[(k, k)] < 0.0 {
            out.column_mut(k).mapv_inplace(|v| -v);
        }
    }
    out
}

pub(crate) fn max_abs(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `max |UᵀU − I|`.
pub fn orthonormality_error(u: ArrayView2<'_, f64>) -> f64 {
    let gram = u.t().dot(&u);
    let c = gram.nrows();
    let mut worst = 0.0_f64;
    for i in 0..c {
        for j in 0..c {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[[i, j]] - target).abs());
        }
    }
    worst
}
