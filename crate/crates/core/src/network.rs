//! The embedding network `Ψ_θ`, its decoder `Ψ′_θ′`, identity pretraining and
//! the mini-batch gradient of the clumping objective.
//!
//! Networks are plain fully connected MLPs with `tanh` hidden units and a
//! linear output. Samples are rows: a layer maps `A ↦ act(A·W + b)` with `W`
//! of shape `(fan_in, fan_out)`. Gradients are computed by hand with the
//! chain rule.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KnetError, Result};
use crate::kernel::{squared_distance, validate_data, Bandwidth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, m: &mut Array2<f64>) {
        if self == Activation::Tanh {
            m.mapv_inplace(f64::tanh);
        }
    }

    /// Multiplies `delta` by the derivative, expressed through the layer output.
    fn backprop(self, output: &Array2<f64>, delta: &mut Array2<f64>) {
        if self == Activation::Tanh {
            Zip::from(delta).and(output).for_each(|d, &y| *d *= 1.0 - y * y);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `(fan_in, fan_out)`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weight: Array2::zeros(self.weight.dim()),
            bias: Array1::zeros(self.bias.len()),
        }
    }
}

/// Fully connected network. Also used as the container for its own gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    hidden: Activation,
    output: Activation,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>, hidden: Activation, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(KnetError::InvalidParameter("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.ncols() {
                return Err(KnetError::Shape(format!(
                    "layer {i}: bias length {} vs fan-out {}",
                    l.bias.len(),
                    l.weight.ncols()
                )));
            }
            if i > 0 && layers[i - 1].weight.ncols() != l.weight.nrows() {
                return Err(KnetError::Shape(format!(
                    "layer {i}: fan-in {} does not match previous fan-out {}",
                    l.weight.nrows(),
                    layers[i - 1].weight.ncols()
                )));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(KnetError::InvalidInput(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Mlp {
            layers,
            hidden,
            output,
        })
    }

    /// Scaled-uniform initialization: `W ~ U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`,
    /// zero biases.
    pub fn xavier<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(KnetError::InvalidParameter(format!("invalid layer widths {widths:?}")));
        }
        let layers = widths
            .windows(2)
            .map(|w| {
                let a = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    weight: Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-a..a)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Mlp::from_layers(layers, Activation::Tanh, Activation::Identity)
    }

    /// Single linear layer computing the identity map on `width` features.
    pub fn linear_identity(width: usize) -> Self {
        Mlp {
            layers: vec![Layer {
                weight: Array2::eye(width),
                bias: Array1::zeros(width),
            }],
            hidden: Activation::Identity,
            output: Activation::Identity,
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.ncols()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(|l| l.weight.ncols()))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
            hidden: self.hidden,
            output: self.output,
        }
    }

    /// All parameters, layer by layer, weight (row-major) before bias.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(KnetError::Shape(format!(
                "network expects {} input features, got {}",
                self.input_width(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Row-wise application of the network.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(self.forward_trace(x).pop().expect("at least one layer"))
    }

    /// Outputs of every layer, starting with the input itself.
    fn forward_trace(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut outs = Vec::with_capacity(self.layers.len() + 1);
        outs.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut a = outs[i].dot(&layer.weight);
            a += &layer.bias.view().insert_axis(Axis(0));
            self.activation_of(i).apply(&mut a);
            outs.push(a);
        }
        outs
    }

    /// Accumulates parameter gradients into `grad` given `∂L/∂output`, and
    /// returns `∂L/∂input`.
    fn backward(&self, trace: &[Array2<f64>], d_out: Array2<f64>, grad: &mut Mlp) -> Array2<f64> {
        let mut delta = d_out;
        for i in (0..self.layers.len()).rev() {
            self.activation_of(i).backprop(&trace[i + 1], &mut delta);
            let g = &mut grad.layers[i];
            g.weight += &trace[i].t().dot(&delta);
            g.bias += &delta.sum_axis(Axis(0));
            delta = delta.dot(&self.layers[i].weight.t());
        }
        delta
    }
}

/// `f(X) = Ψ′(Ψ(X))`.
pub fn reconstruct(encoder: &Mlp, decoder: &Mlp, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if decoder.input_width() != encoder.output_width() {
        return Err(KnetError::Shape(format!(
            "decoder expects {} features, encoder produces {}",
            decoder.input_width(),
            encoder.output_width()
        )));
    }
    let z = encoder.forward(x)?;
    decoder.forward(z.view())
}

/// Adam over the concatenated parameters of one or more networks.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn for_networks(nets: &[&Mlp], learning_rate: f64) -> Self {
        Adam::new(nets.iter().map(|n| n.num_params()).sum(), learning_rate)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One descent step: `param -= lr · m̂ / (sqrt(v̂) + ε)`.
    pub fn step(&mut self, nets: &mut [&mut Mlp], grads: &[&Mlp]) {
        assert_eq!(nets.len(), grads.len(), "one gradient per network");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut k = 0;
        for (net, grad) in nets.iter_mut().zip(grads) {
            for (p, &g) in net.params_mut().zip(grad.params()) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
                k += 1;
            }
        }
        assert_eq!(k, self.m.len(), "optimizer state does not match parameter count");
    }
}

fn select_rows(x: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

fn sum_squares(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

#[derive(Debug, Clone)]
pub struct PretrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once the full-data loss improves by less than this fraction over an
    /// epoch and the residual is within `max_residual`.
    pub rel_tol: f64,
    /// Required `‖Ψ(X) − X‖_F / ‖X‖_F`.
    pub max_residual: f64,
    /// Anneal the learning rate from `learning_rate` towards zero along a half
    /// cosine over `max_epochs`.
    pub cosine: bool,
}

impl PretrainConfig {
    /// Three hidden layers of `width` units.
    pub fn with_width(width: usize) -> Self {
        PretrainConfig {
            hidden: vec![width; 3],
            learning_rate: 1e-2,
            batch_size: 8,
            max_epochs: 400,
            rel_tol: 1e-4,
            max_residual: 0.05,
            cosine: true,
        }
    }

    /// Hidden width used for a `d`-dimensional input: 20 for planar data, `d` otherwise.
    pub fn default_for_dim(d: usize) -> Self {
        PretrainConfig::with_width(if d <= 2 { 20 } else { d })
    }
}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub encoder: Mlp,
    pub decoder: Mlp,
    /// `‖Ψ(X) − X‖_F / ‖X‖_F` after training.
    pub residual: f64,
    /// Sum of the mini-batch losses over each epoch.
    pub losses: Vec<f64>,
}

fn identity_loss(encoder: &Mlp, decoder: &Mlp, x: ArrayView2<'_, f64>) -> f64 {
    let z = encoder.forward_trace(x).pop().expect("layer");
    let f = decoder.forward_trace(z.view()).pop().expect("layer");
    sum_squares(&(&x - &z)) + sum_squares(&(&x - &f))
}

/// `‖X − Ψ(X)‖_F`.
fn identity_residual(encoder: &Mlp, x: ArrayView2<'_, f64>) -> Result<f64> {
    let z = encoder.forward(x)?;
    Ok(sum_squares(&(&z - &x)).sqrt())
}

/// Fresh initializations tried before pretraining gives up.
pub const PRETRAIN_ATTEMPTS: usize = 5;

/// Trains `Ψ` towards the identity map and `Ψ′` towards its inverse by
/// minimizing `‖X − Ψ(X)‖² + ‖X − Ψ′(Ψ(X))‖²` with Adam.
///
/// Some initializations stall with one input direction collapsed; those are
/// retried from a new initialization, up to [`PRETRAIN_ATTEMPTS`] in total,
/// with seeds derived from `seed`. The error carries the best residual seen.
pub fn pretrain_identity(x: ArrayView2<'_, f64>, config: &PretrainConfig, seed: u64) -> Result<Pretrained> {
    validate_data(x)?;
    if config.batch_size == 0 {
        return Err(KnetError::InvalidParameter("batch size must be positive".into()));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NAN;
    for attempt in 0..PRETRAIN_ATTEMPTS {
        match pretrain_attempt(x, config, seeds.random()) {
            Err(KnetError::Pretraining { residual, .. }) => {
                log::debug!("pretraining attempt {attempt} stalled at residual {residual:.4}");
                if best.is_nan() || residual < best {
                    best = residual;
                }
            }
            other => return other,
        }
    }
    Err(KnetError::Pretraining {
        residual: best,
        threshold: config.max_residual,
    })
}

fn pretrain_attempt(x: ArrayView2<'_, f64>, config: &PretrainConfig, seed: u64) -> Result<Pretrained> {
    let (n, d) = x.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths: Vec<usize> = std::iter::once(d)
        .chain(config.hidden.iter().copied())
        .chain(std::iter::once(d))
        .collect();
    let mut encoder = Mlp::xavier(&widths, &mut rng)?;
    let mut decoder = Mlp::xavier(&widths, &mut rng)?;
    let mut adam = Adam::for_networks(&[&encoder, &decoder], config.learning_rate);

    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = Vec::new();
    let x_norm = sum_squares(&x.to_owned()).sqrt();
    let mut previous = identity_loss(&encoder, &decoder, x);
    for epoch in 0..config.max_epochs {
        if config.cosine {
            let t = epoch as f64 / config.max_epochs as f64;
            adam.learning_rate = config.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        }
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let scale = n as f64 / batch.len() as f64;
            let xb = select_rows(x, batch);
            let enc_trace = encoder.forward_trace(xb.view());
            let z = enc_trace.last().expect("layer");
            let dec_trace = decoder.forward_trace(z.view());
            let f = dec_trace.last().expect("layer");

            epoch_loss += sum_squares(&(z - &xb)) + sum_squares(&(f - &xb));

            let mut g_enc = encoder.zeros_like();
            let mut g_dec = decoder.zeros_like();
            let d_f = (f - &xb) * (2.0 * scale);
            let mut d_z = decoder.backward(&dec_trace, d_f, &mut g_dec);
            d_z += &((z - &xb) * (2.0 * scale));
            encoder.backward(&enc_trace, d_z, &mut g_enc);
            adam.step(&mut [&mut encoder, &mut decoder], &[&g_enc, &g_dec]);
        }
        if !epoch_loss.is_finite() {
            return Err(KnetError::Pretraining {
                residual: f64::NAN,
                threshold: config.max_residual,
            });
        }
        losses.push(epoch_loss);
        let improvement = (previous - epoch_loss) / previous.max(f64::MIN_POSITIVE);
        previous = epoch_loss;
        // A stalled epoch only ends training once the residual is acceptable.
        if improvement < config.rel_tol && identity_residual(&encoder, x)? <= config.max_residual * x_norm {
            break;
        }
    }

    let residual = identity_residual(&encoder, x)? / x_norm;
    if !(residual <= config.max_residual) {
        return Err(KnetError::Pretraining {
            residual,
            threshold: config.max_residual,
        });
    }
    Ok(Pretrained {
        encoder,
        decoder,
        residual,
        losses,
    })
}

/// Value and parameter gradients of the mini-batch training loss.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    /// Clumping part `−(N/|B|) Σ_{i∈B, j} Γ_ij k(z_i, z_j)`.
    pub clumping: f64,
    /// Reconstruction part `λ (N/|B|) Σ_{i∈B} ‖x_i − f(x_i)‖²`.
    pub reconstruction: f64,
    pub encoder: Mlp,
    pub decoder: Mlp,
}

/// Inputs that stay fixed across the mini-batches of one epoch.
#[derive(Debug, Clone, Copy)]
pub struct BatchObjective<'a> {
    pub x: ArrayView2<'a, f64>,
    pub gamma: ArrayView2<'a, f64>,
    pub sigma: Bandwidth,
    pub lambda: f64,
}

/// Loss of the batch rows `B` against all `N` columns of `Γ`:
///
/// ```text
/// loss = −(N/|B|) Σ_{i∈B} Σ_j Γ_ij exp(−‖z_i − z_j‖² / 2σ²) + λ (N/|B|) Σ_{i∈B} ‖x_i − f(x_i)‖²
/// ```
///
/// Batch rows are embedded with the current parameters; every other `z_j` is
/// read from `z_cache` and treated as a constant.
pub fn loss_and_grad(
    encoder: &Mlp,
    decoder: &Mlp,
    batch: &[usize],
    objective: &BatchObjective<'_>,
    z_cache: ArrayView2<'_, f64>,
) -> Result<LossGrad> {
    let BatchObjective {
        x,
        gamma,
        sigma,
        lambda,
    } = *objective;
    if batch.is_empty() {
        return Err(KnetError::InvalidParameter("empty mini-batch".into()));
    }
    let n = x.nrows();
    if gamma.dim() != (n, n) || z_cache.nrows() != n || z_cache.ncols() != encoder.output_width() {
        return Err(KnetError::Shape(format!(
            "data {:?}, gamma {:?}, embedding cache {:?}",
            x.dim(),
            gamma.dim(),
            z_cache.dim()
        )));
    }
    if let Some(&bad) = batch.iter().find(|&&i| i >= n) {
        return Err(KnetError::InvalidParameter(format!("batch row {bad} out of range")));
    }

    let scale = n as f64 / batch.len() as f64;
    let xb = select_rows(x, batch);
    let enc_trace = encoder.forward_trace(xb.view());
    let zb = enc_trace.last().expect("layer");
    let mut position = vec![usize::MAX; n];
    for (p, &i) in batch.iter().enumerate() {
        position[i] = p;
    }

    let g = sigma.gamma();
    let width = zb.ncols();
    let mut d_z = Array2::<f64>::zeros(zb.dim());
    let mut clump = 0.0;
    let mut diff = vec![0.0; width];
    for (p, &i) in batch.iter().enumerate() {
        let zi = zb.row(p);
        let gamma_row = gamma.row(i);
        for j in 0..n {
            let w = gamma_row[j];
            if w == 0.0 {
                continue;
            }
            let q = (position[j] != usize::MAX).then_some(position[j]);
            let zj = match q {
                Some(q) => zb.row(q),
                None => z_cache.row(j),
            };
            let k = (-g * squared_distance(zi, zj)).exp();
            clump += w * k;
            if j == i {
                continue;
            }
            // ∂/∂z_i of −scale·w·k = scale·w·k·2g·(z_i − z_j)
            let coeff = scale * w * k * 2.0 * g;
            for (t, dv) in diff.iter_mut().enumerate() {
                *dv = coeff * (zi[t] - zj[t]);
            }
            for t in 0..width {
                d_z[[p, t]] += diff[t];
            }
            if let Some(q) = q {
                for t in 0..width {
                    d_z[[q, t]] -= diff[t];
                }
            }
        }
    }
    let clumping = -scale * clump;

    let mut g_enc = encoder.zeros_like();
    let mut g_dec = decoder.zeros_like();
    let mut reconstruction = 0.0;
    if lambda != 0.0 {
        let dec_trace = decoder.forward_trace(zb.view());
        let f = dec_trace.last().expect("layer");
        let r = f - &xb;
        reconstruction = lambda * scale * sum_squares(&r);
        let d_f = r * (2.0 * lambda * scale);
        d_z += &decoder.backward(&dec_trace, d_f, &mut g_dec);
    }
    encoder.backward(&enc_trace, d_z, &mut g_enc);

    Ok(LossGrad {
        loss: clumping + reconstruction,
        clumping,
        reconstruction,
        encoder: g_enc,
        decoder: g_dec,
    })
}

/// One epoch of stochastic gradient ascent on the joint objective (descent on
/// [`loss_and_grad`]) over a random permutation of the rows, with `Γ`, `σ`
/// and the degree normalization held fixed.
///
/// Returns the mean mini-batch loss.
#[allow(clippy::too_many_arguments)]
pub fn sga_epoch<R: Rng + ?Sized>(
    encoder: &mut Mlp,
    decoder: &mut Mlp,
    objective: &BatchObjective<'_>,
    adam: &mut Adam,
    batch_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if batch_size == 0 {
        return Err(KnetError::InvalidParameter("batch size must be positive".into()));
    }
    let n = objective.x.nrows();
    let mut z_cache = encoder.forward(objective.x)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    let mut batches = 0usize;
    for batch in order.chunks(batch_size) {
        let lg = loss_and_grad(encoder, decoder, batch, objective, z_cache.view())?;
        if !lg.loss.is_finite() {
            return Ok(f64::NAN);
        }
        total += lg.loss;
        batches += 1;
        adam.step(&mut [encoder, decoder], &[&lg.encoder, &lg.decoder]);
        let fresh = encoder.forward_trace(select_rows(objective.x, batch).view());
        let fresh = fresh.last().expect("layer");
        for (p, &i) in batch.iter().enumerate() {
            z_cache.row_mut(i).assign(&fresh.row(p));
        }
    }
    Ok(total / batches as f64)
}

/// Versioned, self-describing JSON form of a network.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpDocument {
    pub format: String,
    pub version: u32,
    pub widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub layers: Vec<LayerDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDocument {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_in × fan_out`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

pub const MLP_FORMAT: &str = "knet-mlp";
pub const MLP_FORMAT_VERSION: u32 = 1;

impl From<&Mlp> for MlpDocument {
    fn from(net: &Mlp) -> Self {
        MlpDocument {
            format: MLP_FORMAT.to_string(),
            version: MLP_FORMAT_VERSION,
            widths: net.widths(),
            hidden_activation: net.hidden,
            output_activation: net.output,
            layers: net
                .layers
                .iter()
                .map(|l| LayerDocument {
                    fan_in: l.weight.nrows(),
                    fan_out: l.weight.ncols(),
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MlpDocument> for Mlp {
    type Error = KnetError;

    fn try_from(doc: MlpDocument) -> Result<Self> {
        if doc.format != MLP_FORMAT || doc.version != MLP_FORMAT_VERSION {
            return Err(KnetError::InvalidInput(format!(
                "unsupported network format {} v{}",
                doc.format, doc.version
            )));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                let weight = Array2::from_shape_vec((l.fan_in, l.fan_out), l.weight)
                    .map_err(|e| KnetError::Shape(format!("layer weight: {e}")))?;
                Ok(Layer {
                    weight,
                    bias: Array1::from_vec(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Mlp::from_layers(layers, doc.hidden_activation, doc.output_activation)?;
        if net.widths() != doc.widths {
            return Err(KnetError::Shape(format!(
                "declared widths {:?} disagree with layers {:?}",
                doc.widths,
                net.widths()
            )));
        }
        Ok(net)
    }
}
