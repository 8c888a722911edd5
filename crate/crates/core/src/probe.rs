//! Post-hoc audit: how well can a fresh classifier recover the PSV from
//! embeddings it never trained against?

use rand::seq::SliceRandom;

use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::fair::sigmoid;
use crate::matrix::Matrix;
use crate::nn::{adam_step, AdamState, DenseNet};
use crate::rng::{epoch_permutation, stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of each PSV group held out for scoring the probe.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            hidden: vec![32, 16],
            epochs: 100,
            batch_size: 64,
            learning_rate: 3e-3,
            holdout: 0.3,
            seed: 0,
        }
    }
}

/// Stratified split: a `holdout` share of each group goes to the second list.
fn stratified_split(z: &[u8], holdout: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream_rng(seed, Stream::Probe, 0);
    let mut fit = Vec::new();
    let mut held = Vec::new();
    for g in 0..2u8 {
        let mut idx: Vec<usize> = (0..z.len()).filter(|&i| z[i] == g).collect();
        idx.shuffle(&mut rng);
        let n_held = (holdout * idx.len() as f64).round() as usize;
        held.extend_from_slice(&idx[..n_held]);
        fit.extend_from_slice(&idx[n_held..]);
    }
    fit.sort_unstable();
    held.sort_unstable();
    (fit, held)
}

/// Trains an MLP on standardized embeddings of one split and returns its
/// PSV accuracy on the other.
pub fn probe_accuracy(embeddings: &Matrix, z: &[u8], config: &ProbeConfig) -> Result<f64> {
    if embeddings.rows() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: embeddings.rows(),
            found: z.len(),
        });
    }
    if !(config.holdout > 0.0 && config.holdout < 1.0) {
        return Err(Error::InvalidArgument("holdout must lie in (0, 1)".into()));
    }
    let (fit, held) = stratified_split(z, config.holdout, config.seed);
    if fit.is_empty() || held.is_empty() {
        return Err(Error::Empty("probe split"));
    }
    let scaler = Scaler::fit(&embeddings.select_rows(&fit));
    let x_fit = scaler.transform(&embeddings.select_rows(&fit))?;
    let x_held = scaler.transform(&embeddings.select_rows(&held))?;
    let z_fit: Vec<u8> = fit.iter().map(|&i| z[i]).collect();

    let mut widths = config.hidden.clone();
    widths.push(1);
    let mut rng = stream_rng(config.seed, Stream::Probe, 1);
    let mut net = DenseNet::new(embeddings.cols(), &widths, true, &mut rng)?;
    let mut adam = AdamState::for_net(&net, config.learning_rate);
    for epoch in 0..config.epochs {
        let order = epoch_permutation(fit.len(), config.seed, Stream::Probe, 2 + epoch as u64);
        for rows in order.chunks(config.batch_size.max(1)) {
            let x = x_fit.select_rows(rows);
            let zb: Vec<u8> = rows.iter().map(|&i| z_fit[i]).collect();
            let (logits, tape) = net.forward(&x)?;
            let m = rows.len() as f64;
            let mut g = logits.clone();
            for (gv, &zi) in g.as_mut_slice().iter_mut().zip(&zb) {
                *gv = (sigmoid(*gv) - f64::from(zi)) / m;
            }
            let (grads, _) = net.backward(&tape, &g)?;
            adam_step(&mut net, &grads, &mut adam)?;
        }
    }
    let logits = net.predict(&x_held)?;
    let correct = logits
        .as_slice()
        .iter()
        .zip(&held)
        .filter(|(&l, &i)| u8::from(l > 0.0) == z[i])
        .count();
    Ok(correct as f64 / held.len() as f64)
}
