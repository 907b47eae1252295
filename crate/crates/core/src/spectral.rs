//! Centered normalized Laplacian and its leading eigenvectors.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{KnetError, Result};
use crate::kernel::{degree_matrix, gaussian_kernel, validate_data, Bandwidth, Degree};
use crate::linalg::{self, max_abs};

/// Above this size the leading eigenpairs are found by restarted Lanczos
/// instead of a full decomposition.
const DENSE_EIGEN_LIMIT: usize = 400;

/// `L = H D^{-1/2} K D^{-1/2} H`.
pub fn laplacian(k: ArrayView2<'_, f64>, degree: &Degree) -> Result<Array2<f64>> {
    let n = k.nrows();
    if k.ncols() != n || degree.len() != n {
        return Err(KnetError::Shape(format!(
            "laplacian: kernel {:?}, degree length {}",
            k.dim(),
            degree.len()
        )));
    }
    let s = degree.inv_sqrt();
    let mut l = Array2::from_shape_fn((n, n), |(i, j)| k[[i, j]] * s[i] * s[j]);
    // Symmetrize before centering so both triangles agree bit for bit.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (l[[i, j]] + l[[j, i]]);
            l[[i, j]] = v;
            l[[j, i]] = v;
        }
    }
    let means: Array1<f64> = l.mean_axis(Axis(1)).expect("non-empty");
    let grand = means.mean().expect("non-empty");
    for i in 0..n {
        for j in i..n {
            let v = l[[i, j]] - means[i] - means[j] + grand;
            l[[i, j]] = v;
            l[[j, i]] = v;
        }
    }
    Ok(l)
}

/// Flips each column so that its largest-magnitude entry (lowest index on
/// ties) is positive.
pub(crate) fn apply_sign_convention(v: &mut Array2<f64>) {
    for mut col in v.columns_mut() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

fn check_symmetric(m: ArrayView2<'_, f64>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(KnetError::Shape(format!("matrix must be square, got {:?}", m.dim())));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[[i, j]] - m[[j, i]]).abs() > 1e-8 {
                return Err(KnetError::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Eigenvectors of the `c` algebraically largest eigenvalues, in descending
/// eigenvalue order, together with those eigenvalues.
pub fn top_eigenpairs(m: ArrayView2<'_, f64>, c: usize) -> Result<(Array1<f64>, Array2<f64>)> {
    check_symmetric(m)?;
    let n = m.nrows();
    if c == 0 || c > n {
        return Err(KnetError::InvalidParameter(format!(
            "requested {c} eigenvectors of a {n}x{n} matrix"
        )));
    }
    if n > DENSE_EIGEN_LIMIT && 4 * c < n {
        if let Some((vals, mut vecs)) = linalg::symmetric_top_eigen_krylov(m, c, None) {
            let resid = m.dot(&vecs) - &vecs * &vals.view().insert_axis(Axis(0));
            let scale = max_abs(m).max(1.0);
            if max_abs(resid.view()) <= 1e-9 * scale
                && linalg::orthonormality_error(vecs.view()) <= 1e-10
            {
                apply_sign_convention(&mut vecs);
                return Ok((vals, vecs));
            }
            log::debug!("lanczos residual too large; falling back to dense eigensolver");
        }
    }
    let (vals, vecs) = linalg::symmetric_eigen(m)?;
    let mut top = vecs.slice(ndarray::s![.., ..c]).to_owned();
    apply_sign_convention(&mut top);
    Ok((vals.slice(ndarray::s![..c]).to_owned(), top))
}

pub fn top_eigenvectors(m: ArrayView2<'_, f64>, c: usize) -> Result<Array2<f64>> {
    top_eigenpairs(m, c).map(|(_, v)| v)
}

/// `U₀`: the top-`c` eigenvectors of the Laplacian of the Gaussian kernel on `X`.
pub fn spectral_embedding(x: ArrayView2<'_, f64>, sigma: Bandwidth, c: usize) -> Result<Array2<f64>> {
    validate_data(x)?;
    let k = gaussian_kernel(x, sigma)?;
    let d = degree_matrix(k.view())?;
    let l = laplacian(k.view(), &d)?;
    top_eigenvectors(l.view(), c)
}
