//! One-class Deep SVDD: a bias-free encoder contracted toward a fixed center.
//!
//! The anomaly score of `x` is `‖f(x; θ) − c‖²`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{adam_step, AdamState, DenseNet, Gradients, Tape};
use crate::rng::{epoch_permutation, stream_rng, Stream};

/// Smallest magnitude a center coordinate may have once nudged.
pub const CENTER_MIN_ABS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// α in the `(α/2)·Σ‖W‖²` regularizer.
    pub weight_decay: f64,
    /// λ in `L_SVDD − λ·L_D`.
    pub lambda: f64,
    /// K: encoder pretraining epochs, also the discriminator warm-up length.
    pub pretrain_epochs: usize,
    /// T: alternating adversarial epochs.
    pub adversarial_epochs: usize,
    pub seed: u64,
    /// Encoder layer widths; the last one is the embedding dimension.
    pub encoder_widths: Vec<usize>,
    /// Discriminator hidden widths; a single-logit output layer is appended.
    pub discriminator_widths: Vec<usize>,
    /// Standardize discriminator inputs with the statistics of each batch.
    pub discriminator_batch_norm: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 128,
            weight_decay: 5e-6,
            lambda: 1.0,
            pretrain_epochs: 50,
            adversarial_epochs: 100,
            seed: 0,
            encoder_widths: vec![32, 16],
            discriminator_widths: vec![32, 64, 32],
            discriminator_batch_norm: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return bad("encoder_widths must be non-empty and positive");
        }
        if self.discriminator_widths.contains(&0) {
            return bad("discriminator_widths must be positive");
        }
        Ok(())
    }

    /// The plain-model config with the same total encoder budget (K + T) as
    /// the fair schedule.
    pub fn matched_baseline(&self) -> TrainConfig {
        TrainConfig {
            pretrain_epochs: self.pretrain_epochs + self.adversarial_epochs,
            adversarial_epochs: 0,
            ..self.clone()
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.encoder_widths.last().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvddModel {
    pub encoder: DenseNet,
    pub center: Vec<f64>,
    pub config: TrainConfig,
}

impl SvddModel {
    pub fn new(encoder: DenseNet, center: Vec<f64>, config: TrainConfig) -> Result<Self> {
        if encoder.output_dim() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: encoder.output_dim(),
                found: center.len(),
            });
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("center is not finite".into()));
        }
        Ok(SvddModel {
            encoder,
            center,
            config,
        })
    }

    pub fn embed(&self, features: &Matrix) -> Result<Matrix> {
        self.encoder.predict(features)
    }
}

/// Fresh bias-free encoder for `input_dim` features, seeded from `config.seed`.
pub fn init_encoder(input_dim: usize, config: &TrainConfig) -> Result<DenseNet> {
    let mut rng = stream_rng(config.seed, Stream::EncoderInit, 0);
    DenseNet::new(input_dim, &config.encoder_widths, false, &mut rng)
}

/// Mean embedding of `train` under `encoder`, without nudging.
pub fn embedding_mean(encoder: &DenseNet, train: &Dataset) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    Ok(encoder.predict(&train.features)?.column_means())
}

/// The hypersphere center: the mean initial embedding. When that mean has
/// norm below [`CENTER_MIN_ABS`], every coordinate smaller than it in
/// magnitude is pushed out to `±CENTER_MIN_ABS`, keeping its sign.
pub fn init_center(encoder: &DenseNet, train: &Dataset) -> Result<Vec<f64>> {
    let mut c = embedding_mean(encoder, train)?;
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < CENTER_MIN_ABS {
        for v in &mut c {
            if v.abs() < CENTER_MIN_ABS {
                *v = CENTER_MIN_ABS.copysign(*v);
            }
        }
    }
    Ok(c)
}

fn check_center(encoder: &DenseNet, center: &[f64]) -> Result<()> {
    if encoder.output_dim() != center.len() {
        return Err(Error::DimensionMismatch {
            expected: encoder.output_dim(),
            found: center.len(),
        });
    }
    Ok(())
}

/// `(1/M) Σ ‖e_i − c‖²` over rows of `embeddings`.
pub(crate) fn mean_sq_distance(embeddings: &Matrix, center: &[f64]) -> f64 {
    if embeddings.rows() == 0 {
        return 0.0;
    }
    let total: f64 = embeddings.iter_rows().map(|e| sq_distance(e, center)).sum();
    total / embeddings.rows() as f64
}

#[inline]
fn sq_distance(e: &[f64], c: &[f64]) -> f64 {
    e.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `L_SVDD = (1/M) Σ ‖f(x_i) − c‖² + (α/2) Σ_ℓ ‖W_ℓ‖²` on one batch.
pub fn svdd_loss(encoder: &DenseNet, batch: &Matrix, center: &[f64], alpha: f64) -> Result<f64> {
    check_center(encoder, center)?;
    let emb = encoder.predict(batch)?;
    Ok(mean_sq_distance(&emb, center) + encoder.weight_decay_term(alpha))
}

/// Loss and encoder-parameter gradient of `L_SVDD` from an existing forward pass.
pub(crate) fn svdd_grad_from_tape(
    encoder: &DenseNet,
    embeddings: &Matrix,
    tape: &Tape,
    center: &[f64],
    alpha: f64,
) -> Result<(f64, Gradients)> {
    let m = embeddings.rows() as f64;
    let mut d_emb = embeddings.clone();
    for r in 0..d_emb.rows() {
        for (v, c) in d_emb.row_mut(r).iter_mut().zip(center) {
            *v = 2.0 * (*v - c) / m;
        }
    }
    let (mut grads, _) = encoder.backward(tape, &d_emb)?;
    encoder.add_weight_decay_grad(alpha, &mut grads);
    let loss = mean_sq_distance(embeddings, center) + encoder.weight_decay_term(alpha);
    Ok((loss, grads))
}

/// `L_SVDD` and its gradient with respect to the encoder parameters.
pub fn svdd_loss_and_grad(
    encoder: &DenseNet,
    batch: &Matrix,
    center: &[f64],
    alpha: f64,
) -> Result<(f64, Gradients)> {
    check_center(encoder, center)?;
    let (emb, tape) = encoder.forward(batch)?;
    svdd_grad_from_tape(encoder, &emb, &tape, center, alpha)
}

/// Consecutive `batch_size` chunks of a shuffled index list.
pub(crate) fn batches(perm: &[usize], batch_size: usize) -> impl Iterator<Item = &[usize]> {
    perm.chunks(batch_size)
}

/// Encoder state shared by the plain and the fair schedules so that both
/// consume exactly the same shuffles and updates.
pub(crate) struct EncoderTrainer<'a> {
    pub encoder: DenseNet,
    pub adam: AdamState,
    pub center: Vec<f64>,
    pub data: &'a Dataset,
    pub config: &'a TrainConfig,
}

impl<'a> EncoderTrainer<'a> {
    pub fn new(data: &'a Dataset, config: &'a TrainConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let encoder = init_encoder(data.n_dims(), config)?;
        let center = init_center(&encoder, data)?;
        let adam = AdamState::for_net(&encoder, config.learning_rate);
        Ok(EncoderTrainer {
            encoder,
            adam,
            center,
            data,
            config,
        })
    }

    /// Batch order for encoder epoch `epoch` (counted across all phases).
    pub fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        epoch_permutation(
            self.data.len(),
            self.config.seed,
            Stream::EncoderShuffle,
            epoch as u64,
        )
    }

    pub fn apply(&mut self, grads: &Gradients) -> Result<()> {
        adam_step(&mut self.encoder, grads, &mut self.adam)
    }

    /// One plain SVDD update on `rows`; returns the pre-update batch loss.
    pub fn svdd_step(&mut self, rows: &[usize]) -> Result<f64> {
        let x = self.data.features.select_rows(rows);
        let (loss, grads) =
            svdd_loss_and_grad(&self.encoder, &x, &self.center, self.config.weight_decay)?;
        if !loss.is_finite() {
            return Ok(loss);
        }
        self.apply(&grads)?;
        Ok(loss)
    }
}

/// Plain Deep SVDD trained for `config.pretrain_epochs` epochs. Returns the
/// model and the mean batch loss of every epoch.
pub fn train_svdd_traced(train: &Dataset, config: &TrainConfig) -> Result<(SvddModel, Vec<f64>)> {
    let mut t = EncoderTrainer::new(train, config)?;
    let mut losses = Vec::with_capacity(config.pretrain_epochs);
    for epoch in 0..config.pretrain_epochs {
        let order = t.epoch_order(epoch);
        let mut sum = 0.0;
        let mut count = 0usize;
        for rows in batches(&order, config.batch_size) {
            let loss = t.svdd_step(rows)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    what: "L_SVDD",
                    phase: "pretrain",
                    epoch: epoch + 1,
                });
            }
            sum += loss;
            count += 1;
        }
        losses.push(sum / count as f64);
    }
    let model = SvddModel::new(t.encoder, t.center, config.clone())?;
    Ok((model, losses))
}

/// Writes plain-training losses in the same `epoch, phase, l_svdd, l_d,
/// l_adv` layout as the fair trace, with the discriminator columns blank.
pub fn write_loss_trace_csv(losses: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "phase", "l_svdd", "l_d", "l_adv"])?;
    for (i, l) in losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), "pretrain".into(), l.to_string(), String::new(), String::new()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn train_svdd(train: &Dataset, config: &TrainConfig) -> Result<SvddModel> {
    train_svdd_traced(train, config).map(|(m, _)| m)
}

/// `‖f(x) − c‖²` per instance.
pub fn score(model: &SvddModel, data: &Dataset) -> Result<Vec<f64>> {
    score_features(model, &data.features)
}

pub fn score_features(model: &SvddModel, features: &Matrix) -> Result<Vec<f64>> {
    if features.rows() == 0 {
        return Ok(Vec::new());
    }
    let emb = model.embed(features)?;
    Ok(emb.iter_rows().map(|e| sq_distance(e, &model.center)).collect())
}

fn label_field(labels: &Option<Vec<u8>>, i: usize) -> String {
    labels.as_ref().map_or_else(String::new, |l| l[i].to_string())
}

/// Writes `e_0, …, e_{k−1}, psv, label`; `label` is blank when absent.
pub fn export_embeddings(model: &SvddModel, data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let k = model.encoder.output_dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..k).map(|j| format!("e_{j}")).collect();
    header.push("psv".into());
    header.push("label".into());
    w.write_record(&header)?;
    if !data.is_empty() {
        let emb = model.embed(&data.features)?;
        for (i, row) in emb.iter_rows().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(data.psv[i].to_string());
            rec.push(label_field(&data.labels, i));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Per-instance scores with their PSV and optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub scores: Vec<f64>,
    pub psv: Vec<u8>,
    pub labels: Option<Vec<u8>>,
}

impl ScoreTable {
    pub fn from_model(model: &SvddModel, data: &Dataset) -> Result<Self> {
        Ok(ScoreTable {
            scores: score(model, data)?,
            psv: data.psv.clone(),
            labels: data.labels.clone(),
        })
    }

    /// Writes `score, psv, label`; `label` is blank when absent.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["score", "psv", "label"])?;
        for (i, s) in self.scores.iter().enumerate() {
            w.write_record([s.to_string(), self.psv[i].to_string(), label_field(&self.labels, i)])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads the `score, psv, label` schema. Labels are kept only if every row has one.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["score", "psv", "label"] {
            return Err(Error::InvalidArgument(format!(
                "{}: expected header score,psv,label",
                path.display()
            )));
        }
        let mut scores = Vec::new();
        let mut psv = Vec::new();
        let mut labels = Vec::new();
        let mut all_labelled = true;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let s = rec[0].trim();
            scores.push(s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::NonNumeric {
                    row,
                    column: "score".into(),
                    value: s.into(),
                }
            })?);
            psv.push(match rec[1].trim() {
                "0" => 0,
                "1" => 1,
                v => {
                    return Err(Error::NonBinaryPsv {
                        row,
                        value: v.into(),
                    })
                }
            });
            match rec[2].trim() {
                "" => all_labelled = false,
                "0" => labels.push(0),
                "1" => labels.push(1),
                v => {
                    return Err(Error::NonBinaryLabel {
                        row,
                        value: v.into(),
                    })
                }
            }
        }
        Ok(ScoreTable {
            scores,
            psv,
            labels: (all_labelled && !labels.is_empty()).then_some(labels),
        })
    }
}
