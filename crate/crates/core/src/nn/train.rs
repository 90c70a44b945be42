//! Mini-batch Adam training of the 3-class networks, prediction of the
//! loss-tail probability, and flat-binary weight checkpoints.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::features::{FeatureMatrix, FeatureVariant};
use crate::nn::lstm::{LstmMasks, LstmWeights};
use crate::nn::mlp::{MlpMasks, MlpWeights};
use crate::timeseries::{LabelSeries, ProbabilitySeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Mlp,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Early-stop patience in epochs on the validation slice; 0 disables.
    pub patience: usize,
    /// Fraction of the most recent samples held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            patience: 10,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

/// A trained classifier of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Mlp(MlpWeights),
    Lstm(LstmWeights),
}

enum MaskSet {
    Mlp(MlpMasks),
    Lstm(LstmMasks),
}

impl Network {
    pub fn arch(&self) -> Arch {
        match self {
            Network::Mlp(_) => Arch::Mlp,
            Network::Lstm(_) => Arch::Lstm,
        }
    }

    /// Deterministic class probabilities (evaluation mode).
    pub fn predict(&self, row: &[f64]) -> Vec<f64> {
        match self {
            Network::Mlp(w) => w.forward(row, None),
            Network::Lstm(w) => w.forward(row, None),
        }
    }

    fn sample_masks(&self, rng: &mut ChaCha12Rng) -> MaskSet {
        match self {
            Network::Mlp(w) => MaskSet::Mlp(w.sample_masks(rng)),
            Network::Lstm(w) => MaskSet::Lstm(w.sample_masks(rng)),
        }
    }

    fn loss_grad(&self, row: &[f64], label: usize, masks: Option<&MaskSet>) -> (f64, Vec<f64>) {
        match (self, masks) {
            (Network::Mlp(w), Some(MaskSet::Mlp(m))) => w.loss_grad(row, label, Some(m)),
            (Network::Mlp(w), None) => w.loss_grad(row, label, None),
            (Network::Lstm(w), Some(MaskSet::Lstm(m))) => w.loss_grad(row, label, Some(m)),
            (Network::Lstm(w), None) => w.loss_grad(row, label, None),
            _ => unreachable!("mask set does not match architecture"),
        }
    }

    fn eval_loss(&self, rows: &[&[f64]], labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for (row, &y) in rows.iter().zip(labels) {
            let p = self.predict(row);
            total += crate::nn::common::cross_entropy(&p, y);
        }
        total / rows.len().max(1) as f64
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Network::Mlp(w) => w.params(),
            Network::Lstm(w) => w.params(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        match self {
            Network::Mlp(w) => w.set_params(p),
            Network::Lstm(w) => w.set_params(p),
        }
    }
}

/// Trained weights with the per-epoch loss trace.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: Network,
    pub loss_trace: Vec<f64>,
    pub epochs_run: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let b1t = 1.0 - cfg.beta1.powi(self.t as i32);
        let b2t = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
        }
    }
}

/// Intersect features and labels by timestamp into training pairs.
fn paired<'a>(
    features: &'a FeatureMatrix,
    labels: &LabelSeries,
) -> Result<(Vec<&'a [f64]>, Vec<usize>)> {
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    let mut j = 0usize;
    for (i, &t) in features.timestamps.iter().enumerate() {
        while j < labels.timestamps.len() && labels.timestamps[j] < t {
            j += 1;
        }
        if j < labels.timestamps.len() && labels.timestamps[j] == t {
            rows.push(features.row(i));
            ys.push(labels.labels[j] as usize);
        }
    }
    if rows.is_empty() {
        return Err(Error::Misaligned(
            "features and labels share no timestamps".into(),
        ));
    }
    Ok((rows, ys))
}

/// Train a fresh network of the requested architecture. Deterministic for
/// a fixed seed: initialization, shuffling and dropout all come from one
/// seeded stream, and execution is strictly sequential.
pub fn train(
    features: &FeatureMatrix,
    labels: &LabelSeries,
    config: &TrainConfig,
    arch: Arch,
) -> Result<TrainedModel> {
    match (arch, features.variant) {
        (Arch::Mlp, FeatureVariant::Mlp) | (Arch::Lstm, FeatureVariant::Lstm) => {}
        _ => {
            return Err(Error::InvalidParams(
                "feature variant does not match architecture".into(),
            ))
        }
    }
    if config.batch_size == 0 || config.learning_rate <= 0.0 {
        return Err(Error::InvalidParams(
            "batch_size must be >= 1 and learning rate positive".into(),
        ));
    }
    let (rows, ys) = paired(features, labels)?;

    let n = rows.len();
    let n_val = ((n as f64 * config.validation_fraction) as usize).min(n.saturating_sub(1));
    let n_train = n - n_val;
    let (train_rows, val_rows) = rows.split_at(n_train);
    let (train_ys, val_ys) = ys.split_at(n_train);

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut network = match arch {
        Arch::Mlp => Network::Mlp(MlpWeights::init(&mut rng)),
        Arch::Lstm => Network::Lstm(LstmWeights::init(&mut rng)),
    };

    let mut params = network.params();
    let mut adam = Adam::new(params.len());
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut since_best = 0usize;
    let mut epochs_run = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grad = vec![0.0; params.len()];
            let mut batch_loss = 0.0;
            for &i in batch {
                let masks = network.sample_masks(&mut rng);
                let (loss, g) = network.loss_grad(train_rows[i], train_ys[i], Some(&masks));
                batch_loss += loss;
                for (acc, gi) in grad.iter_mut().zip(&g) {
                    *acc += gi;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grad.iter_mut() {
                *g *= scale;
            }
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            adam.step(&mut params, &grad, config);
            network.set_params(&params);
            epoch_loss += batch_loss * batch.len() as f64;
        }
        loss_trace.push(epoch_loss / n_train as f64);
        epochs_run = epoch + 1;

        if n_val > 0 && config.patience > 0 {
            let val_loss = network.eval_loss(val_rows, val_ys);
            if val_loss < best_val - 1e-12 {
                best_val = val_loss;
                best_params = params.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    break;
                }
            }
        }
    }

    if n_val > 0 && config.patience > 0 {
        network.set_params(&best_params);
    }
    Ok(TrainedModel {
        network,
        loss_trace,
        epochs_run,
    })
}

/// Extract the loss-tail (class 2) probability per timestamp.
pub fn predict_p2(network: &Network, features: &FeatureMatrix) -> Result<ProbabilitySeries> {
    let mut values = Vec::with_capacity(features.len());
    for i in 0..features.len() {
        let p = network.predict(features.row(i));
        values.push(p[2]);
    }
    ProbabilitySeries::new(features.timestamps.clone(), values)
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON header + raw little-endian f64 parameters
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 4] = b"NNW1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointHeader {
    arch: Arch,
    param_count: usize,
    dropout_rate: f64,
    seed: u64,
    config: Option<TrainConfig>,
}

/// Write weights as a flat binary checkpoint.
pub fn save_checkpoint(
    network: &Network,
    path: &Path,
    seed: u64,
    config: Option<&TrainConfig>,
) -> Result<()> {
    let params = network.params();
    let header = CheckpointHeader {
        arch: network.arch(),
        param_count: params.len(),
        dropout_rate: match network {
            Network::Mlp(w) => w.dropout_rate,
            Network::Lstm(w) => w.dropout_rate,
        },
        seed,
        config: config.copied(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(CHECKPOINT_MAGIC)?;
    file.write_all(&(header_json.len() as u32).to_le_bytes())?;
    file.write_all(&header_json)?;
    for p in &params {
        file.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(Network, u64)> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Io(format!(
            "{} is not a weight checkpoint",
            path.display()
        )));
    }
    let mut len_bytes = [0u8; 4];
    file.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_json = vec![0u8; header_len];
    file.read_exact(&mut header_json)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_json)?;

    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;
    if raw.len() != header.param_count * 8 {
        return Err(Error::Io(format!(
            "checkpoint payload is {} bytes, expected {}",
            raw.len(),
            header.param_count * 8
        )));
    }
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let mut network = match header.arch {
        Arch::Mlp => Network::Mlp(MlpWeights::init(&mut rng)),
        Arch::Lstm => Network::Lstm(LstmWeights::init(&mut rng)),
    };
    if params.len() != network.params().len() {
        return Err(Error::Io("checkpoint parameter count mismatch".into()));
    }
    network.set_params(&params);
    Ok((network, header.seed))
}
