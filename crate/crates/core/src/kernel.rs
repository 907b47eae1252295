//! Gaussian kernels, degree vectors and symmetric normalization.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{KnetError, Result};

/// Gaussian kernel bandwidth `σ`, in the units of the feature space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Bandwidth(sigma))
        } else {
            Err(KnetError::InvalidParameter(format!(
                "bandwidth must be positive and finite, got {sigma}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 / (2σ²)`, the factor multiplying squared distances in the exponent.
    pub fn gamma(self) -> f64 {
        1.0 / (2.0 * self.0 * self.0)
    }
}

/// Diagonal of the degree matrix: row sums of a kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Degree(Array1<f64>);

impl Degree {
    pub fn from_diagonal(diag: Array1<f64>) -> Result<Self> {
        if let Some((i, d)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
            return Err(KnetError::Degenerate(format!(
                "degree entry {i} is {d}, must be positive"
            )));
        }
        Ok(Degree(diag))
    }

    pub fn diag(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inv_sqrt(&self) -> Array1<f64> {
        self.0.mapv(|d| 1.0 / d.sqrt())
    }

    pub fn identity(n: usize) -> Self {
        Degree(Array1::ones(n))
    }
}

/// Checks the data-matrix invariants: at least two rows, one column, all finite.
pub fn validate_data(x: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() < 2 || x.ncols() < 1 {
        return Err(KnetError::InvalidInput(format!(
            "data matrix must be at least 2x1, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(KnetError::InvalidInput(format!(
            "non-finite entry at row {}, column {}",
            pos / x.ncols(),
            pos % x.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// `K[i][j] = exp(-‖x_i - x_j‖² / 2σ²)`, each unordered pair evaluated once.
pub fn gaussian_kernel(x: ArrayView2<'_, f64>, sigma: Bandwidth) -> Result<Array2<f64>> {
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(KnetError::InvalidInput(format!(
            "non-finite entry at row {}, column {}",
            pos / x.ncols().max(1),
            pos % x.ncols().max(1)
        )));
    }
    Ok(gaussian_kernel_unchecked(x, sigma))
}

pub(crate) fn gaussian_kernel_unchecked(x: ArrayView2<'_, f64>, sigma: Bandwidth) -> Array2<f64> {
    let n = x.nrows();
    let g = sigma.gamma();
    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        let xi = x.row(i);
        for j in (i + 1)..n {
            let v = (-g * squared_distance(xi, x.row(j))).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

pub fn degree_matrix(k: ArrayView2<'_, f64>) -> Result<Degree> {
    if k.nrows() != k.ncols() {
        return Err(KnetError::Shape(format!(
            "kernel must be square, got {:?}",
            k.dim()
        )));
    }
    let diag = Array1::from_iter(k.rows().into_iter().map(|r| r.sum()));
    Degree::from_diagonal(diag)
}

/// `K[i][j] / sqrt(d_i d_j)`.
pub fn normalize_kernel(k: ArrayView2<'_, f64>, degree: &Degree) -> Result<Array2<f64>> {
    let n = k.nrows();
    if k.ncols() != n || degree.len() != n {
        return Err(KnetError::Shape(format!(
            "kernel {:?} vs degree length {}",
            k.dim(),
            degree.len()
        )));
    }
    let s = degree.inv_sqrt();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| k[[i, j]] * s[i] * s[j]))
}

/// Median of all `N(N-1)/2` pairwise Euclidean distances; for an even count the
/// mean of the two middle values.
pub fn median_sigma(x: ArrayView2<'_, f64>) -> Result<Bandwidth> {
    validate_data(x)?;
    let n = x.nrows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(squared_distance(x.row(i), x.row(j)).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if !(median > 0.0) {
        return Err(KnetError::Degenerate(
            "median pairwise distance is zero; bandwidth would vanish".into(),
        ));
    }
    Bandwidth::new(median)
}
