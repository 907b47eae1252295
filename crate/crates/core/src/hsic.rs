//! Empirical HSIC with a linear output kernel, the `Γ` weight matrix and the
//! pairwise (clumping) form of the objective.
//!
//! The centering matrix `H = I - 11ᵀ/N` is never materialized: applying it to
//! a matrix subtracts the column means.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{KnetError, Result};
use crate::kernel::{squared_distance, Bandwidth, Degree};

/// `H·M`: subtract each column's mean.
pub fn center(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    if m.nrows() == 0 {
        return out;
    }
    if let Some(means) = m.mean_axis(Axis(0)) {
        out -= &means.insert_axis(Axis(0));
    }
    out
}

/// `(1/(N-1)²)·tr(K̃ H U Uᵀ H)`.
pub fn hsic(k_tilde: ArrayView2<'_, f64>, u: ArrayView2<'_, f64>) -> Result<f64> {
    let n = k_tilde.nrows();
    if k_tilde.ncols() != n || u.nrows() != n {
        return Err(KnetError::Shape(format!(
            "hsic: kernel {:?}, embedding {:?}",
            k_tilde.dim(),
            u.dim()
        )));
    }
    if n < 2 {
        return Err(KnetError::InvalidInput("hsic needs at least two rows".into()));
    }
    let hu = center(u);
    let khu = k_tilde.dot(&hu);
    let tr: f64 = (&hu * &khu).sum();
    let scale = (n - 1) as f64;
    Ok(tr / (scale * scale))
}

/// `Γ = D^{-1/2} H U Uᵀ H D^{-1/2}`.
pub fn gamma_matrix(u: ArrayView2<'_, f64>, degree: &Degree) -> Result<Array2<f64>> {
    let factor = gamma_factor(u, degree)?;
    Ok(factor.dot(&factor.t()))
}

/// The `N×c` factor `V = D^{-1/2} H U` with `Γ = V Vᵀ`.
pub fn gamma_factor(u: ArrayView2<'_, f64>, degree: &Degree) -> Result<Array2<f64>> {
    if u.nrows() != degree.len() {
        return Err(KnetError::Shape(format!(
            "gamma: embedding has {} rows, degree has {}",
            u.nrows(),
            degree.len()
        )));
    }
    let mut v = center(u);
    let s = degree.inv_sqrt();
    v *= &s.insert_axis(Axis(1));
    Ok(v)
}

/// `Σ_{i,j} Γ[i][j]·exp(-‖z_i - z_j‖² / 2σ²)`.
pub fn clumping_objective(
    z: ArrayView2<'_, f64>,
    gamma: ArrayView2<'_, f64>,
    sigma: Bandwidth,
) -> Result<f64> {
    let n = z.nrows();
    if gamma.dim() != (n, n) {
        return Err(KnetError::Shape(format!(
            "clumping: embedding has {} rows, gamma is {:?}",
            n,
            gamma.dim()
        )));
    }
    let g = sigma.gamma();
    let mut total = 0.0;
    for i in 0..n {
        total += gamma[[i, i]];
        let zi = z.row(i);
        let mut row = 0.0;
        for j in (i + 1)..n {
            let k = (-g * squared_distance(zi, z.row(j))).exp();
            row += (gamma[[i, j]] + gamma[[j, i]]) * k;
        }
        total += row;
    }
    Ok(total)
}
