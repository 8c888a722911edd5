//! Deep Fair SVDD: the encoder is trained against a discriminator that tries
//! to recover the protected-status variable from the embeddings.
//!
//! Schedule, with K = `pretrain_epochs` and T = `adversarial_epochs`:
//!
//! 1. K epochs minimizing `L_SVDD` over the encoder.
//! 2. K epochs minimizing `L_D` over the discriminator, encoder frozen.
//! 3. T epochs; on every minibatch one discriminator step on `L_D`
//!    (encoder frozen), then one encoder step on `L_Adv = L_SVDD − λ·L_D`
//!    (discriminator frozen), both on the same rows.
//!
//! The encoder draws its batch order from its own seeded stream, indexed by
//! the encoder epoch across phases 1 and 3, so with λ = 0 the encoder ends
//! bit-identical to plain Deep SVDD trained for K + T epochs.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{adam_step, AdamState, DenseNet, Gradients, Layer, Tape};
use crate::rng::{epoch_permutation, stream_rng, Stream};
use crate::svdd::{self, batches, EncoderTrainer, SvddModel, TrainConfig};

/// Logits are clamped to this magnitude when evaluating the cross-entropy.
pub const LOGIT_CLAMP: f64 = 40.0;

/// Probabilities handed to [`disc_loss`] are kept inside `[ε, 1 − ε]`.
const PROB_FLOOR: f64 = f64::EPSILON;

/// Added to the batch variance when standardizing inside the discriminator.
pub const BATCH_NORM_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub net: DenseNet,
    /// Standardize the input and every hidden pre-activation per column with
    /// the mean and variance of the batch being scored. There is no learned
    /// affine term, so hidden-layer biases cancel.
    pub batch_norm: bool,
}

/// Saved state of one discriminator forward pass.
pub enum DiscTape {
    Plain(Tape),
    Normalized {
        /// Input of each layer, after normalization and activation.
        inputs: Vec<Matrix>,
        /// Standardized values and inverse deviations, input first, then one
        /// entry per hidden layer.
        norms: Vec<(Matrix, Vec<f64>)>,
    },
}

fn batch_standardize(x: &Matrix) -> (Matrix, Vec<f64>) {
    let mean = x.column_means();
    let m = x.rows().max(1) as f64;
    let mut var = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for ((v, &xi), &mu) in var.iter_mut().zip(row).zip(&mean) {
            *v += (xi - mu) * (xi - mu);
        }
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v / m + BATCH_NORM_EPS).sqrt()).collect();
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = (*v - mean[j]) * inv_std[j];
        }
    }
    (out, inv_std)
}

/// `∂L/∂x` from `∂L/∂x̂`, differentiating through the batch statistics.
fn batch_standardize_backward(xhat: &Matrix, inv_std: &[f64], d_xhat: &Matrix) -> Matrix {
    let m = xhat.rows() as f64;
    let cols = xhat.cols();
    let mut sum_d = vec![0.0; cols];
    let mut sum_dx = vec![0.0; cols];
    for (dr, xr) in d_xhat.iter_rows().zip(xhat.iter_rows()) {
        for j in 0..cols {
            sum_d[j] += dr[j];
            sum_dx[j] += dr[j] * xr[j];
        }
    }
    let mut out = d_xhat.clone();
    for i in 0..out.rows() {
        let xr = xhat.row(i);
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = inv_std[j] * (*v - sum_d[j] / m - xr[j] * sum_dx[j] / m);
        }
    }
    out
}

fn affine(x: &Matrix, layer: &Layer) -> Matrix {
    let mut out = x.matmul_transposed(&layer.weight);
    if let Some(b) = &layer.bias {
        for i in 0..out.rows() {
            for (v, bj) in out.row_mut(i).iter_mut().zip(b) {
                *v += bj;
            }
        }
    }
    out
}

impl Discriminator {
    /// `embed_dim → hidden… → 1` with biases and ReLU hidden layers.
    pub fn new(embed_dim: usize, hidden: &[usize], batch_norm: bool, seed: u64) -> Result<Self> {
        let mut widths = hidden.to_vec();
        widths.push(1);
        let mut rng = stream_rng(seed, Stream::DiscriminatorInit, 0);
        Ok(Discriminator {
            net: DenseNet::new(embed_dim, &widths, true, &mut rng)?,
            batch_norm,
        })
    }

    pub fn from_net(net: DenseNet, batch_norm: bool) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: net.output_dim(),
            });
        }
        Ok(Discriminator { net, batch_norm })
    }

    pub fn forward(&self, embeddings: &Matrix) -> Result<(Vec<f64>, DiscTape)> {
        if !self.batch_norm {
            let (logits, tape) = self.net.forward(embeddings)?;
            return Ok((logits.as_slice().to_vec(), DiscTape::Plain(tape)));
        }
        if embeddings.cols() != self.net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.net.input_dim(),
                found: embeddings.cols(),
            });
        }
        let layers = self.net.layers();
        let (mut h, inv_std) = batch_standardize(embeddings);
        let mut norms = vec![(h.clone(), inv_std)];
        let mut inputs = Vec::with_capacity(layers.len());
        for layer in &layers[..layers.len() - 1] {
            let pre = affine(&h, layer);
            inputs.push(h);
            let (std, inv_std) = batch_standardize(&pre);
            h = std.clone();
            h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            norms.push((std, inv_std));
        }
        let logits = affine(&h, &layers[layers.len() - 1]);
        inputs.push(h);
        Ok((logits.as_slice().to_vec(), DiscTape::Normalized { inputs, norms }))
    }

    /// Parameter gradients and `∂L/∂embeddings` from `∂L/∂logits`.
    pub fn backward(&self, tape: &DiscTape, d_logits: &Matrix) -> Result<(Gradients, Matrix)> {
        let (inputs, norms) = match tape {
            DiscTape::Plain(t) => return self.net.backward(t, d_logits),
            DiscTape::Normalized { inputs, norms } => (inputs, norms),
        };
        let layers = self.net.layers();
        let mut weights = Vec::with_capacity(layers.len());
        let mut biases = Vec::with_capacity(layers.len());
        let mut d_out = d_logits.clone();
        for (l, layer) in layers.iter().enumerate().rev() {
            weights.push(d_out.transposed_matmul(&inputs[l]));
            biases.push(Some(d_out.column_sums()));
            let mut d_in = d_out.matmul(&layer.weight);
            let (xhat, inv_std) = &norms[l];
            if l > 0 {
                // ReLU of the standardized pre-activation.
                for (g, &v) in d_in.as_mut_slice().iter_mut().zip(inputs[l].as_slice()) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            d_out = batch_standardize_backward(xhat, inv_std, &d_in);
        }
        weights.reverse();
        biases.reverse();
        Ok((Gradients { weights, biases }, d_out))
    }

    pub fn logits(&self, embeddings: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward(embeddings)?.0)
    }
}

#[inline]
pub fn sigmoid(logit: f64) -> f64 {
    if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Probability that each embedding belongs to PSV group 1. Values lie in
/// `[ε, 1 − ε]` so their logarithms stay finite.
pub fn disc_predict(disc: &Discriminator, embeddings: &Matrix) -> Result<Vec<f64>> {
    Ok(disc
        .logits(embeddings)?
        .into_iter()
        .map(|l| sigmoid(l).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
        .collect())
}

fn check_lengths(a: usize, z: &[u8]) -> Result<()> {
    if a != z.len() {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: z.len(),
        });
    }
    if a == 0 {
        return Err(Error::Empty("discriminator batch"));
    }
    if let Some(row) = z.iter().position(|&v| v > 1) {
        return Err(Error::NonBinaryPsv {
            row: row + 1,
            value: z[row].to_string(),
        });
    }
    Ok(())
}

/// Binary cross-entropy `−(1/M) Σ [z ln ẑ + (1 − z) ln(1 − ẑ)]` from probabilities.
pub fn disc_loss(probs: &[f64], z: &[u8]) -> Result<f64> {
    check_lengths(probs.len(), z)?;
    let total: f64 = probs
        .iter()
        .zip(z)
        .map(|(&p, &zi)| {
            let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            if zi == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// The same cross-entropy evaluated from logits as `softplus(l) − z·l`, with
/// `l` clamped to `±LOGIT_CLAMP`.
pub fn disc_loss_from_logits(logits: &[f64], z: &[u8]) -> Result<f64> {
    check_lengths(logits.len(), z)?;
    let total: f64 = logits
        .iter()
        .zip(z)
        .map(|(&l, &zi)| {
            let l = l.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            softplus(l) - f64::from(zi) * l
        })
        .sum();
    Ok(total / logits.len() as f64)
}

/// `∂L_D/∂logit_i = (σ(l_i) − z_i)/M`. The clamp in the loss value is not
/// differentiated through, so saturated logits still receive a gradient.
fn disc_loss_logit_grad(logits: &[f64], z: &[u8]) -> Matrix {
    let m = logits.len() as f64;
    let g = logits
        .iter()
        .zip(z)
        .map(|(&l, &zi)| (sigmoid(l) - f64::from(zi)) / m)
        .collect();
    Matrix::from_vec(logits.len(), 1, g).expect("column vector")
}

/// `L_Adv = L_SVDD − λ·L_D`.
pub fn adv_loss(l_svdd: f64, l_d: f64, lambda: f64) -> f64 {
    l_svdd - lambda * l_d
}

/// Losses and gradients of one minibatch through the encoder–discriminator stack.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub l_svdd: f64,
    pub l_d: f64,
    pub l_adv: f64,
    /// `∂L_SVDD/∂θ`.
    pub encoder_svdd: Gradients,
    /// `∂L_D/∂θ`, through the discriminator.
    pub encoder_disc: Gradients,
    /// `∂L_Adv/∂θ = ∂L_SVDD/∂θ − λ·∂L_D/∂θ`.
    pub encoder_adv: Gradients,
    /// `∂L_D/∂θ_d`.
    pub discriminator: Gradients,
}

fn combine(svdd: &Gradients, disc: &Gradients, lambda: f64) -> Gradients {
    let mut out = svdd.clone();
    if lambda == 0.0 {
        return out;
    }
    for (o, d) in out.weights.iter_mut().zip(&disc.weights) {
        for (a, b) in o.as_mut_slice().iter_mut().zip(d.as_slice()) {
            *a -= lambda * b;
        }
    }
    for (o, d) in out.biases.iter_mut().zip(&disc.biases) {
        if let (Some(o), Some(d)) = (o, d) {
            for (a, b) in o.iter_mut().zip(d) {
                *a -= lambda * b;
            }
        }
    }
    out
}

/// Gradients of `L_SVDD`, `L_D` and `L_Adv` for one batch `x` with PSVs `z`.
pub fn adversarial_gradients(
    encoder: &DenseNet,
    center: &[f64],
    disc: &Discriminator,
    x: &Matrix,
    z: &[u8],
    alpha: f64,
    lambda: f64,
) -> Result<BatchGradients> {
    check_lengths(x.rows(), z)?;
    let (emb, enc_tape) = encoder.forward(x)?;
    let (l_svdd, encoder_svdd) = svdd::svdd_grad_from_tape(encoder, &emb, &enc_tape, center, alpha)?;
    let (logits, disc_tape) = disc.forward(&emb)?;
    let l_d = disc_loss_from_logits(&logits, z)?;
    let (discriminator, d_emb) = disc.backward(&disc_tape, &disc_loss_logit_grad(&logits, z))?;
    let (encoder_disc, _) = encoder.backward(&enc_tape, &d_emb)?;
    let encoder_adv = combine(&encoder_svdd, &encoder_disc, lambda);
    Ok(BatchGradients {
        l_svdd,
        l_d,
        l_adv: adv_loss(l_svdd, l_d, lambda),
        encoder_svdd,
        encoder_disc,
        encoder_adv,
        discriminator,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    DiscInit,
    Adversarial,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::DiscInit => "disc_init",
            Phase::Adversarial => "adversarial",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mean batch losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based, counted across all phases.
    pub epoch: usize,
    pub phase: Phase,
    pub l_svdd: f64,
    pub l_d: f64,
    pub l_adv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairSvddModel {
    pub svdd: SvddModel,
    pub discriminator: Discriminator,
    pub trace: Vec<TraceEntry>,
}

impl FairSvddModel {
    /// Anomaly scores; the discriminator plays no part.
    pub fn score(&self, data: &Dataset) -> Result<Vec<f64>> {
        svdd::score(&self.svdd, data)
    }
}

/// Writes `epoch, phase, l_svdd, l_d, l_adv`.
pub fn write_trace_csv(trace: &[TraceEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "phase", "l_svdd", "l_d", "l_adv"])?;
    for t in trace {
        w.write_record([
            t.epoch.to_string(),
            t.phase.to_string(),
            t.l_svdd.to_string(),
            t.l_d.to_string(),
            t.l_adv.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Default)]
struct Means {
    svdd: f64,
    d: f64,
    adv: f64,
    n: usize,
}

impl Means {
    fn add(&mut self, l_svdd: f64, l_d: f64, l_adv: f64) {
        self.svdd += l_svdd;
        self.d += l_d;
        self.adv += l_adv;
        self.n += 1;
    }

    fn entry(&self, epoch: usize, phase: Phase) -> TraceEntry {
        let n = self.n.max(1) as f64;
        TraceEntry {
            epoch,
            phase,
            l_svdd: self.svdd / n,
            l_d: self.d / n,
            l_adv: self.adv / n,
        }
    }
}

fn ensure_finite(values: &[f64], what: &'static str, phase: Phase, epoch: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            what,
            phase: phase.as_str(),
            epoch,
        })
    }
}

struct DiscTrainer {
    disc: Discriminator,
    adam: AdamState,
}

impl DiscTrainer {
    /// One step on `L_D` for fixed embeddings; returns the pre-update loss.
    fn step(&mut self, emb: &Matrix, z: &[u8]) -> Result<f64> {
        let (logits, tape) = self.disc.forward(emb)?;
        let l_d = disc_loss_from_logits(&logits, z)?;
        if !l_d.is_finite() {
            return Ok(l_d);
        }
        let (grads, _) = self.disc.backward(&tape, &disc_loss_logit_grad(&logits, z))?;
        adam_step(&mut self.disc.net, &grads, &mut self.adam)?;
        Ok(l_d)
    }
}

/// Runs the three-phase schedule. `train` must be normal-only and contain
/// both PSV values.
pub fn train_fair_svdd(train: &Dataset, config: &TrainConfig) -> Result<FairSvddModel> {
    train.require_both_groups()?;
    let mut enc = EncoderTrainer::new(train, config)?;
    let disc = Discriminator::new(
        config.embed_dim(),
        &config.discriminator_widths,
        config.discriminator_batch_norm,
        config.seed,
    )?;
    let adam = AdamState::for_net(&disc.net, config.learning_rate);
    let mut dt = DiscTrainer { disc, adam };

    let k = config.pretrain_epochs;
    let alpha = config.weight_decay;
    let lambda = config.lambda;
    let mut trace = Vec::with_capacity(2 * k + config.adversarial_epochs);

    // Phase 1: encoder only. L_D is observed, not optimized.
    for epoch in 0..k {
        let mut means = Means::default();
        for rows in batches(&enc.epoch_order(epoch), config.batch_size) {
            let z: Vec<u8> = rows.iter().map(|&i| train.psv[i]).collect();
            let x = train.features.select_rows(rows);
            let emb = enc.encoder.predict(&x)?;
            let l_d = disc_loss_from_logits(&dt.disc.logits(&emb)?, &z)?;
            let l_svdd = enc.svdd_step(rows)?;
            ensure_finite(&[l_svdd, l_d], "L_SVDD/L_D", Phase::Pretrain, trace.len() + 1)?;
            means.add(l_svdd, l_d, adv_loss(l_svdd, l_d, lambda));
        }
        trace.push(means.entry(trace.len() + 1, Phase::Pretrain));
    }

    // Phase 2: discriminator only, on embeddings of the frozen encoder.
    let frozen = enc.encoder.predict(&train.features)?;
    let wd = enc.encoder.weight_decay_term(alpha);
    for epoch in 0..k {
        let mut means = Means::default();
        let order = epoch_permutation(
            train.len(),
            config.seed,
            Stream::DiscriminatorShuffle,
            epoch as u64,
        );
        for rows in batches(&order, config.batch_size) {
            let z: Vec<u8> = rows.iter().map(|&i| train.psv[i]).collect();
            let emb = frozen.select_rows(rows);
            let l_svdd = svdd::mean_sq_distance(&emb, &enc.center) + wd;
            let l_d = dt.step(&emb, &z)?;
            ensure_finite(&[l_svdd, l_d], "L_D", Phase::DiscInit, trace.len() + 1)?;
            means.add(l_svdd, l_d, adv_loss(l_svdd, l_d, lambda));
        }
        trace.push(means.entry(trace.len() + 1, Phase::DiscInit));
    }

    // Phase 3: alternate per minibatch.
    for epoch in 0..config.adversarial_epochs {
        let mut means = Means::default();
        for rows in batches(&enc.epoch_order(k + epoch), config.batch_size) {
            let z: Vec<u8> = rows.iter().map(|&i| train.psv[i]).collect();
            let x = train.features.select_rows(rows);

            let enc_sum = enc.encoder.checksum();
            let emb = enc.encoder.predict(&x)?;
            let l_d_disc = dt.step(&emb, &z)?;
            debug_assert_eq!(enc_sum, enc.encoder.checksum(), "encoder moved during disc step");
            ensure_finite(&[l_d_disc], "L_D", Phase::Adversarial, trace.len() + 1)?;

            let disc_sum = dt.disc.net.checksum();
            let g = adversarial_gradients(&enc.encoder, &enc.center, &dt.disc, &x, &z, alpha, lambda)?;
            ensure_finite(&[g.l_svdd, g.l_d, g.l_adv], "L_Adv", Phase::Adversarial, trace.len() + 1)?;
            enc.apply(&g.encoder_adv)?;
            debug_assert_eq!(disc_sum, dt.disc.net.checksum(), "discriminator moved during encoder step");

            means.add(g.l_svdd, g.l_d, g.l_adv);
        }
        trace.push(means.entry(trace.len() + 1, Phase::Adversarial));
    }

    Ok(FairSvddModel {
        svdd: SvddModel::new(enc.encoder, enc.center, config.clone())?,
        discriminator: dt.disc,
        trace,
    })
}
