//! The alternating KNet loop: identity pretraining, spectral initialization,
//! then epochs of network ascent interleaved with updates of `U`, and a final
//! k-means on the learned embedding.

use std::fs::File;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{assign_nearest, kmeans};
use crate::error::{KnetError, Result};
use crate::hsic::gamma_matrix;
use crate::kernel::{degree_matrix, gaussian_kernel, median_sigma, normalize_kernel, validate_data, Bandwidth};
use crate::network::{pretrain_identity, reconstruct, sga_epoch, Adam, BatchObjective, Mlp, MlpDocument, PretrainConfig};
use crate::spectral::{laplacian, spectral_embedding, top_eigenvectors};
use crate::stiefel::{trace_objective, StiefelAscent};

/// Cayley steps per outer iteration on the SMA path.
pub const SMA_MAX_STEPS: usize = 20;
/// The SMA inner loop stops once a step gains less than this.
pub const SMA_MIN_GAIN: f64 = 1e-6;
/// Tolerance of the zero-mean check on the training data.
const MEAN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Median pairwise distance of the training data.
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UUpdate {
    /// Top eigenvectors of the current Laplacian.
    #[serde(rename = "EIG", alias = "eig")]
    Eig,
    /// Line-searched Cayley ascent on the Stiefel manifold.
    #[serde(rename = "SMA", alias = "sma")]
    Sma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KNetConfig {
    /// Number of clusters.
    pub c: usize,
    pub sigma: SigmaMode,
    /// Weight of the autoencoder reconstruction term.
    pub lambda: f64,
    pub u_update: UUpdate,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_outer_iters: usize,
    /// Outer iterations always run before the convergence test may stop the loop.
    pub min_outer_iters: usize,
    pub convergence_tol: f64,
    pub kmeans_restarts: usize,
    /// Hidden width of the networks; 20 for planar data and `d` otherwise when absent.
    pub hidden_width: Option<usize>,
    pub seed: u64,
}

impl Default for KNetConfig {
    fn default() -> Self {
        KNetConfig {
            c: 2,
            sigma: SigmaMode::Median,
            lambda: 0.0,
            u_update: UUpdate::Eig,
            learning_rate: 1e-3,
            batch_size: 5,
            max_outer_iters: 200,
            min_outer_iters: 1,
            convergence_tol: 1e-3,
            kmeans_restarts: 10,
            hidden_width: None,
            seed: 0,
        }
    }
}

impl KNetConfig {
    pub fn new(c: usize) -> Self {
        KNetConfig {
            c,
            ..KNetConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KnetError::InvalidParameter(msg));
        if self.c < 2 {
            return bad(format!("c must be at least 2, got {}", self.c));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.convergence_tol > 0.0) {
            return bad(format!("convergence_tol must be positive, got {}", self.convergence_tol));
        }
        if self.max_outer_iters == 0 || self.min_outer_iters > self.max_outer_iters {
            return bad(format!(
                "need 0 < min_outer_iters <= max_outer_iters, got {} and {}",
                self.min_outer_iters, self.max_outer_iters
            ));
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans_restarts must be positive".into());
        }
        if let SigmaMode::Fixed(s) = self.sigma {
            Bandwidth::new(s)?;
        }
        if self.hidden_width == Some(0) {
            return bad("hidden_width must be positive".into());
        }
        Ok(())
    }
}

/// State recorded after each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Empirical HSIC between the learned normalized kernel and `UUᵀ`.
    pub hsic: f64,
    /// Mean squared autoencoder reconstruction error per sample.
    pub recon_error: f64,
    /// Change of `UUᵀ` over the iteration, see [`kernel_change`].
    pub conv_metric: f64,
    /// Mean mini-batch loss of the network epoch.
    pub epoch_loss: f64,
    /// `tr(UᵀLU)` on the refreshed Laplacian before and after the `U` update.
    pub trace_before: f64,
    pub trace_after: f64,
}

/// Wall-clock split: pretraining plus spectral initialization, then the
/// alternating loop plus k-means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub prep_seconds: f64,
    pub run_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    NearestCenter,
    KmeansRefit,
}

#[derive(Debug, Clone)]
pub struct KNetModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    /// Final spectral embedding, `N × c` with orthonormal columns.
    pub u: Array2<f64>,
    pub sigma: Bandwidth,
    /// `c × d′` k-means centers in embedding space.
    pub centers: Array2<f64>,
    pub labels: Vec<usize>,
    /// `Ψ(X)` of the training data.
    pub embedding: Array2<f64>,
    pub config: KNetConfig,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub pretrain_residual: f64,
    pub timings: Timings,
}

/// `‖U₁U₁ᵀ − U₀U₀ᵀ‖_F / √c`, evaluated through `c × c` products.
pub fn kernel_change(u_prev: ArrayView2<'_, f64>, u_curr: ArrayView2<'_, f64>) -> Result<f64> {
    if u_prev.dim() != u_curr.dim() {
        return Err(KnetError::Shape(format!(
            "cannot compare U of shapes {:?} and {:?}",
            u_prev.dim(),
            u_curr.dim()
        )));
    }
    let sq = |a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>| a.t().dot(&b).iter().map(|v| v * v).sum::<f64>();
    let c = u_prev.ncols().max(1) as f64;
    let frob2 = sq(u_prev, u_prev) + sq(u_curr, u_curr) - 2.0 * sq(u_prev, u_curr);
    Ok(frob2.max(0.0).sqrt() / c.sqrt())
}

/// Whether the linear kernel `UUᵀ` moved by less than `tol` (see [`kernel_change`]).
pub fn converged(u_prev: ArrayView2<'_, f64>, u_curr: ArrayView2<'_, f64>, tol: f64) -> bool {
    kernel_change(u_prev, u_curr).is_ok_and(|m| m < tol)
}

fn check_centered(x: ArrayView2<'_, f64>) {
    if let Some(mean) = x.mean_axis(Axis(0)) {
        if let Some((j, m)) = mean.iter().enumerate().find(|(_, m)| m.abs() > MEAN_TOLERANCE) {
            log::warn!("feature {j} has mean {m:.3e}; KNet expects standardized input");
        }
    }
}

fn mean_recon_error(encoder: &Mlp, decoder: &Mlp, x: ArrayView2<'_, f64>) -> Result<f64> {
    let f = reconstruct(encoder, decoder, x)?;
    Ok((&x - &f).iter().map(|v| v * v).sum::<f64>() / x.nrows() as f64)
}

pub fn fit(x: ArrayView2<'_, f64>, config: &KNetConfig) -> Result<KNetModel> {
    config.validate()?;
    validate_data(x)?;
    let (n, d) = x.dim();
    if n < 2 * config.c {
        return Err(KnetError::InvalidInput(format!(
            "need at least 2c = {} samples, got {n}",
            2 * config.c
        )));
    }
    check_centered(x);

    let prep_start = Instant::now();
    let sigma = match config.sigma {
        SigmaMode::Median => median_sigma(x)?,
        SigmaMode::Fixed(s) => Bandwidth::new(s)?,
    };
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    let pretrain_seed: u64 = seeds.random();
    let epoch_seed: u64 = seeds.random();
    let kmeans_seed: u64 = seeds.random();

    let pretrain_config = match config.hidden_width {
        Some(w) => PretrainConfig::with_width(w),
        None => PretrainConfig::default_for_dim(d),
    };
    let pretrained = pretrain_identity(x, &pretrain_config, pretrain_seed)?;
    log::info!(
        "pretraining finished after {} epochs, residual {:.4}",
        pretrained.losses.len(),
        pretrained.residual
    );
    let mut encoder = pretrained.encoder;
    let mut decoder = pretrained.decoder;
    let mut u = spectral_embedding(x, sigma, config.c)?;
    let prep_seconds = prep_start.elapsed().as_secs_f64();

    let run_start = Instant::now();
    let mut adam = Adam::for_networks(&[&encoder, &decoder], config.learning_rate);
    let mut epoch_rng = ChaCha8Rng::seed_from_u64(epoch_seed);
    let mut sma = StiefelAscent::default();
    let mut history = Vec::new();
    let mut is_converged = false;

    let mut z = encoder.forward(x)?;
    let mut k = gaussian_kernel(z.view(), sigma)?;
    let mut degree = degree_matrix(k.view())?;
    for iteration in 1..=config.max_outer_iters {
        let gamma = gamma_matrix(u.view(), &degree)?;
        let objective = BatchObjective {
            x,
            gamma: gamma.view(),
            sigma,
            lambda: config.lambda,
        };
        let epoch_loss = sga_epoch(
            &mut encoder,
            &mut decoder,
            &objective,
            &mut adam,
            config.batch_size,
            &mut epoch_rng,
        )?;
        if !epoch_loss.is_finite() {
            return Err(KnetError::Divergence { iteration });
        }
        drop(gamma);

        z = encoder.forward(x)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(KnetError::Divergence { iteration });
        }
        k = gaussian_kernel(z.view(), sigma)?;
        degree = degree_matrix(k.view())?;
        let l = laplacian(k.view(), &degree)?;
        let trace_before = trace_objective(l.view(), u.view())?;
        let u_next = match config.u_update {
            UUpdate::Eig => top_eigenvectors(l.view(), config.c)?,
            UUpdate::Sma => sma.ascend(l.view(), u.view(), SMA_MAX_STEPS, SMA_MIN_GAIN)?.u,
        };
        let trace_after = trace_objective(l.view(), u_next.view())?;
        let conv_metric = kernel_change(u.view(), u_next.view())?;
        u = u_next;

        let record = IterationRecord {
            iteration,
            hsic: trace_after / ((n - 1) as f64).powi(2),
            recon_error: mean_recon_error(&encoder, &decoder, x)?,
            conv_metric,
            epoch_loss,
            trace_before,
            trace_after,
        };
        log::debug!(
            "iteration {iteration}: loss {:.6e}, hsic {:.6e}, dK_U {:.3e}",
            record.epoch_loss,
            record.hsic,
            record.conv_metric
        );
        history.push(record);
        if iteration >= config.min_outer_iters && conv_metric < config.convergence_tol {
            is_converged = true;
            break;
        }
    }

    let clustering = kmeans(z.view(), config.c, config.kmeans_restarts, kmeans_seed)?;
    let run_seconds = run_start.elapsed().as_secs_f64();
    log::info!(
        "fit: {} outer iterations (converged: {is_converged}), prep {prep_seconds:.2}s, run {run_seconds:.2}s",
        history.len()
    );

    Ok(KNetModel {
        encoder,
        decoder,
        u,
        sigma,
        centers: clustering.centers,
        labels: clustering.labels,
        embedding: z,
        config: config.clone(),
        history,
        converged: is_converged,
        pretrain_residual: pretrained.residual,
        timings: Timings {
            prep_seconds,
            run_seconds,
        },
    })
}

const MODEL_FORMAT: &str = "knet-model";
const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format: String,
    version: u32,
    config: KNetConfig,
    sigma: Bandwidth,
    encoder: MlpDocument,
    decoder: MlpDocument,
    u: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
    labels: Vec<usize>,
    embedding: Vec<Vec<f64>>,
    history: Vec<IterationRecord>,
    converged: bool,
    pretrain_residual: f64,
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, cols: usize, what: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(KnetError::InvalidInput(format!("{what}: rows must have {cols} entries")));
    }
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| KnetError::Shape(format!("{what}: {e}")))
}

impl KNetModel {
    /// `Ψ_θ(Y)` for new rows.
    pub fn embed(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(KnetError::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / y.ncols(),
                pos % y.ncols()
            )));
        }
        self.encoder.forward(y)
    }

    pub fn predict(&self, y: ArrayView2<'_, f64>, mode: PredictMode) -> Result<Vec<usize>> {
        let z = self.embed(y)?;
        match mode {
            PredictMode::NearestCenter => assign_nearest(self.centers.view(), z.view()),
            PredictMode::KmeansRefit => {
                Ok(kmeans(z.view(), self.config.c, self.config.kmeans_restarts, self.config.seed)?.labels)
            }
        }
    }

    /// The final normalized kernel `D^{-1/2} K D^{-1/2}` on the training embedding.
    pub fn learned_kernel(&self) -> Result<Array2<f64>> {
        let k = gaussian_kernel(self.embedding.view(), self.sigma)?;
        let degree = degree_matrix(k.view())?;
        normalize_kernel(k.view(), &degree)
    }

    pub fn outer_iterations(&self) -> usize {
        self.history.len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            sigma: self.sigma,
            encoder: MlpDocument::from(&self.encoder),
            decoder: MlpDocument::from(&self.decoder),
            u: rows(&self.u),
            centers: rows(&self.centers),
            labels: self.labels.clone(),
            embedding: rows(&self.embedding),
            history: self.history.clone(),
            converged: self.converged,
            pretrain_residual: self.pretrain_residual,
        };
        let file = File::create(path).map_err(|e| KnetError::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &doc)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| KnetError::io(path, e))?;
        let doc: ModelDocument = serde_json::from_reader(std::io::BufReader::new(file))?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_FORMAT_VERSION {
            return Err(KnetError::InvalidInput(format!(
                "{}: expected {MODEL_FORMAT} v{MODEL_FORMAT_VERSION}, found {} v{}",
                path.display(),
                doc.format,
                doc.version
            )));
        }
        doc.config.validate()?;
        let encoder = Mlp::try_from(doc.encoder)?;
        let decoder = Mlp::try_from(doc.decoder)?;
        let width = encoder.output_width();
        let c = doc.config.c;
        let centers = from_rows(doc.centers, width, "centers")?;
        if centers.nrows() != c || doc.labels.iter().any(|&l| l >= c) {
            return Err(KnetError::InvalidInput(format!("{}: inconsistent clustering", path.display())));
        }
        Ok(KNetModel {
            u: from_rows(doc.u, c, "u")?,
            embedding: from_rows(doc.embedding, width, "embedding")?,
            encoder,
            decoder,
            sigma: doc.sigma,
            centers,
            labels: doc.labels,
            config: doc.config,
            history: doc.history,
            converged: doc.converged,
            pretrain_residual: doc.pretrain_residual,
            timings: Timings::default(),
        })
    }
}

/// Writes `iteration,hsic,recon_error,conv_metric`, one row per outer iteration.
pub fn write_history_csv(history: &[IterationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| KnetError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["iteration", "hsic", "recon_error", "conv_metric"])?;
    for r in history {
        w.write_record([
            r.iteration.to_string(),
            r.hsic.to_string(),
            r.recon_error.to_string(),
            r.conv_metric.to_string(),
        ])?;
    }
    w.flush().map_err(|e| KnetError::io(path, e))?;
    Ok(())
}
