//! k-means (k-means++ seeding, Lloyd iterations) and normalized mutual information.

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KnetError, Result};
use crate::kernel::squared_distance;

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `c × d`.
    pub centers: Array2<f64>,
    /// Sum of squared distances to the assigned centers.
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
}

/// Nearest center per row; ties go to the lowest center index.
pub fn assign_nearest(centers: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if centers.ncols() != z.ncols() {
        return Err(KnetError::Shape(format!(
            "centers have {} features, data has {}",
            centers.ncols(),
            z.ncols()
        )));
    }
    if centers.nrows() == 0 {
        return Err(KnetError::InvalidParameter("no centers".into()));
    }
    Ok(z.rows()
        .into_iter()
        .map(|row| nearest(centers, row).0)
        .collect())
}

fn nearest(centers: ArrayView2<'_, f64>, row: ndarray::ArrayView1<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.rows().into_iter().enumerate() {
        let d = squared_distance(row, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus_seed<R: Rng + ?Sized>(z: ArrayView2<'_, f64>, c: usize, rng: &mut R) -> Array2<f64> {
    let n = z.nrows();
    let mut chosen = Vec::with_capacity(c);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(z.row(i), z.row(chosen[0]))).collect();
    while chosen.len() < c {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).expect("positive total");
            }
            pick
        } else {
            // every point coincides with a chosen center
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(pick);
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(squared_distance(z.row(i), z.row(pick)));
        }
    }
    z.select(ndarray::Axis(0), &chosen)
}

fn lloyd(z: ArrayView2<'_, f64>, mut centers: Array2<f64>) -> KMeansResult {
    let (n, d) = z.dim();
    let c = centers.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let (k, dist) = nearest(centers.view(), z.row(i));
            inertia += dist;
            if labels[i] != k {
                labels[i] = k;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((c, d));
        let mut counts = vec![0usize; c];
        for i in 0..n {
            sums.row_mut(labels[i]).scaled_add(1.0, &z.row(i));
            counts[labels[i]] += 1;
        }
        for k in 0..c {
            if counts[k] > 0 {
                centers.row_mut(k).assign(&(&sums.row(k) / counts[k] as f64));
            }
        }
        for k in 0..c {
            if counts[k] == 0 {
                // re-seed at the point farthest from its own center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(z.row(a), centers.row(labels[a]));
                        let db = squared_distance(z.row(b), centers.row(labels[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty data");
                let donor = labels[far];
                counts[donor] -= 1;
                counts[k] = 1;
                labels[far] = k;
                centers.row_mut(k).assign(&z.row(far));
            }
        }
    }
    let inertia = (0..n)
        .map(|i| squared_distance(z.row(i), centers.row(labels[i])))
        .sum();
    KMeansResult {
        labels,
        centers,
        inertia,
        inertia_trace: trace,
    }
}

/// Best-of-`restarts` k-means. Restart seeds derive deterministically from `seed`.
pub fn kmeans(z: ArrayView2<'_, f64>, c: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let n = z.nrows();
    if c == 0 || n < c {
        return Err(KnetError::InvalidParameter(format!(
            "k-means needs 1 <= c <= N, got c = {c}, N = {n}"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(KnetError::InvalidInput("k-means input has non-finite entries".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(master.random());
        let result = lloyd(z, plus_plus_seed(z, c, &mut rng));
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Whether two labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
    })
}

/// `I(A;B) / sqrt(H(A)·H(B))` with natural logarithms. When either entropy is
/// zero the ratio is undefined; the result is 1 for identical partitions and
/// 0 otherwise.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(KnetError::Shape(format!(
            "partitions have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(KnetError::InvalidInput("empty partition".into()));
    }
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ca: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let ha = entropy(ca.values().copied(), n);
    let hb = entropy(cb.values().copied(), n);
    if ha == 0.0 || hb == 0.0 {
        return Ok(if same_partition(a, b) { 1.0 } else { 0.0 });
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &count)| {
            let pxy = count as f64 / n;
            let px = ca[&x] as f64 / n;
            let py = cb[&y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum();
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}
