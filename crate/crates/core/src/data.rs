//! Datasets: synthetic generators, CSV I/O, standardization, PCA and
//! train/holdout splitting.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs::File;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{KnetError, Result};
use crate::spectral::top_eigenpairs;

pub const DEFAULT_MOON_NOISE: f64 = 0.05;
pub const DEFAULT_SPIRAL_NOISE: f64 = 0.03;
/// Number of full turns swept by each spiral arm.
pub const SPIRAL_TURNS: f64 = 0.75;
/// Radius at which each spiral arm starts (the arms end at radius 1).
pub const SPIRAL_INNER_RADIUS: f64 = 0.2;
/// Kernel bandwidth suited to standardized output of [`gen_moons`].
pub const MOONS_SIGMA: f64 = 0.1701;
/// Kernel bandwidth suited to standardized output of [`gen_spirals`].
pub const SPIRALS_SIGMA: f64 = 0.1708;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub x: Array2<f64>,
    pub labels: Option<Vec<usize>>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Number of distinct ground-truth classes, if labels are present.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            x: self.x.select(Axis(0), indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}

fn planar(name: &str, x: Array2<f64>, labels: Vec<usize>) -> LabeledDataset {
    LabeledDataset {
        name: name.to_string(),
        feature_names: vec!["x".into(), "y".into()],
        x,
        labels: Some(labels),
    }
}

fn add_noise(x: &mut Array2<f64>, noise_std: f64, seed: u64) -> Result<()> {
    if noise_std < 0.0 || !noise_std.is_finite() {
        return Err(KnetError::InvalidParameter(format!(
            "noise std must be non-negative, got {noise_std}"
        )));
    }
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std).expect("valid std");
        x.mapv_inplace(|v| v + normal.sample(&mut rng));
    }
    Ok(())
}

/// Two interleaving unit half-circles. The first moon is the upper arc
/// `(cos t, sin t)`, the second the lower arc `(1 − cos t, 0.5 − sin t)`,
/// `t` evenly spaced on `[0, π]`.
pub fn gen_moons(n: usize, noise_std: f64, seed: u64) -> Result<LabeledDataset> {
    if n < 4 {
        return Err(KnetError::InvalidParameter(format!("moons need n >= 4, got {n}")));
    }
    let first = n / 2;
    let second = n - first;
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let step = |m: usize, i: usize| if m > 1 { PI * i as f64 / (m - 1) as f64 } else { 0.0 };
    for i in 0..first {
        let t = step(first, i);
        x[[i, 0]] = t.cos();
        x[[i, 1]] = t.sin();
        labels.push(0);
    }
    for i in 0..second {
        let t = step(second, i);
        x[[first + i, 0]] = 1.0 - t.cos();
        x[[first + i, 1]] = 0.5 - t.sin();
        labels.push(1);
    }
    add_noise(&mut x, noise_std, seed)?;
    Ok(planar("moons", x, labels))
}

/// `arms` Archimedean spiral arms, arm `k` rotated by `2πk/arms`. Along each
/// arm the radius grows linearly from [`SPIRAL_INNER_RADIUS`] to 1 while the
/// angle sweeps [`SPIRAL_TURNS`] turns. When `n` is not a multiple of `arms`
/// the first `n mod arms` arms get one extra point.
pub fn gen_spirals(n: usize, arms: usize, noise_std: f64, seed: u64) -> Result<LabeledDataset> {
    if arms == 0 || n < 3 * arms {
        return Err(KnetError::InvalidParameter(format!(
            "spirals need arms >= 1 and n >= 3*arms, got n = {n}, arms = {arms}"
        )));
    }
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for k in 0..arms {
        let m = n / arms + usize::from(k < n % arms);
        let offset = 2.0 * PI * k as f64 / arms as f64;
        for i in 0..m {
            let t = i as f64 / (m - 1) as f64;
            let angle = 2.0 * PI * SPIRAL_TURNS * t + offset;
            let r = SPIRAL_INNER_RADIUS + (1.0 - SPIRAL_INNER_RADIUS) * t;
            x[[row, 0]] = r * angle.cos();
            x[[row, 1]] = r * angle.sin();
            labels.push(k);
            row += 1;
        }
    }
    add_noise(&mut x, noise_std, seed)?;
    Ok(planar("spirals", x, labels))
}

/// Per-feature affine map to zero mean and unit population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>, feature_names: Option<&[String]>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(KnetError::Preprocessing("cannot standardize an empty matrix".into()));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let std = x.std_axis(Axis(0), 0.0);
        for (j, s) in std.iter().enumerate() {
            if !(*s > 0.0) {
                let name = feature_names
                    .and_then(|n| n.get(j))
                    .cloned()
                    .unwrap_or_else(|| format!("#{j}"));
                return Err(KnetError::Preprocessing(format!(
                    "feature {name} has zero variance"
                )));
            }
        }
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(KnetError::Shape(format!(
                "standardizer fitted on {} features, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok((&x - &self.mean.view().insert_axis(Axis(0))) / &self.std.view().insert_axis(Axis(0)))
    }

    pub fn inverse(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.mean.len() {
            return Err(KnetError::Shape(format!(
                "standardizer fitted on {} features, got {}",
                self.mean.len(),
                z.ncols()
            )));
        }
        Ok(&z * &self.std.view().insert_axis(Axis(0)) + &self.mean.view().insert_axis(Axis(0)))
    }
}

pub fn standardize(x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Standardizer)> {
    let s = Standardizer::fit(x, None)?;
    Ok((s.apply(x)?, s))
}

/// Projection onto the leading principal directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `d × k`, orthonormal columns.
    pub components: Array2<f64>,
    /// Sample variance captured by each component.
    pub variances: Array1<f64>,
}

impl Pca {
    pub fn fit(x: ArrayView2<'_, f64>, d_target: usize) -> Result<Self> {
        let (n, d) = x.dim();
        if d_target == 0 || d_target > d {
            return Err(KnetError::InvalidParameter(format!(
                "PCA target dimension {d_target} must be in 1..={d}"
            )));
        }
        if n < 2 {
            return Err(KnetError::InvalidInput("PCA needs at least two rows".into()));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let centered = &x - &mean.view().insert_axis(Axis(0));
        let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (cov[[i, j]] + cov[[j, i]]);
                cov[[i, j]] = v;
                cov[[j, i]] = v;
            }
        }
        let (variances, components) = top_eigenpairs(cov.view(), d_target)?;
        Ok(Pca {
            mean,
            components,
            variances,
        })
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(KnetError::Shape(format!(
                "PCA fitted on {} features, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok((&x - &self.mean.view().insert_axis(Axis(0))).dot(&self.components))
    }

    pub fn reconstruct(&self, y: ArrayView2<'_, f64>) -> Array2<f64> {
        y.dot(&self.components.t()) + &self.mean.view().insert_axis(Axis(0))
    }
}

pub fn pca_reduce(x: ArrayView2<'_, f64>, d_target: usize) -> Result<(Array2<f64>, Pca)> {
    let pca = Pca::fit(x, d_target)?;
    Ok((pca.transform(x)?, pca))
}

/// Reads a headed CSV of numeric features. When `label_column` is given that
/// column is read as categorical labels, numbered in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| KnetError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = match label_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            KnetError::InvalidInput(format!("{}: no column named \"{name}\"", path.display()))
        })?),
        None => None,
    };
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|&j| Some(j) != label_idx).collect();
    if feature_idx.is_empty() {
        return Err(KnetError::InvalidInput(format!("{}: no feature columns", path.display())));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => KnetError::InvalidInput(format!(
                "{}: ragged row {} has {len} fields, header has {expected_len}",
                path.display(),
                r + 1
            )),
            _ => KnetError::Csv(e),
        })?;
        for &j in &feature_idx {
            let cell = record[j].trim();
            let v: f64 = cell.parse().map_err(|_| KnetError::Parse {
                row: r + 1,
                column: headers[j].clone(),
                message: format!("\"{cell}\" is not a number"),
            })?;
            values.push(v);
        }
        if let Some(li) = label_idx {
            let key = record[li].trim().to_string();
            let next = label_ids.len();
            labels.push(*label_ids.entry(key).or_insert(next));
        }
        rows += 1;
    }
    let x = Array2::from_shape_vec((rows, feature_idx.len()), values)
        .map_err(|e| KnetError::Shape(e.to_string()))?;
    Ok(LabeledDataset {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        feature_names: feature_idx.iter().map(|&j| headers[j].clone()).collect(),
        x,
        labels: label_idx.map(|_| labels),
    })
}

/// Writes features (and a trailing `label` column when labels exist).
pub fn write_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| KnetError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = ds.feature_names.clone();
    if ds.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, row) in ds.x.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = &ds.labels {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| KnetError::io(path, e))?;
    Ok(())
}

/// A random split into a training subset of `⌈fraction·N⌉` rows and the holdout.
#[derive(Debug, Clone)]
pub struct Split {
    pub subset: LabeledDataset,
    pub holdout: LabeledDataset,
    /// Original row indices of `subset`, ascending.
    pub subset_indices: Vec<usize>,
    pub holdout_indices: Vec<usize>,
}

pub fn subsample(ds: &LabeledDataset, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(KnetError::InvalidParameter(format!(
            "subsample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = ds.len();
    let size = ((fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut subset_indices = order[..size].to_vec();
    let mut holdout_indices = order[size..].to_vec();
    subset_indices.sort_unstable();
    holdout_indices.sort_unstable();
    Ok(Split {
        subset: ds.select(&subset_indices),
        holdout: ds.select(&holdout_indices),
        subset_indices,
        holdout_indices,
    })
}
