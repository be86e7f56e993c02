//! Epoch loop shared by the spiking network and the ANN baseline.
//!
//! Patches are shuffled every epoch. A seeded slice of the training patches is
//! held out for validation; its loss drives a reduce-on-plateau learning-rate
//! schedule and early stopping, and the best-validation parameters are
//! restored at the end.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bptt::{bptt_grads, ResetGrad, Sample, SpikeFn};
use super::{Adam, AnnNetwork, Network};
use crate::data::Patch;
use crate::encoding::EncodingConfig;
use crate::error::{Error, Result};
use crate::losses::LossConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub initial_lr: f64,
    /// Epochs without validation improvement before the LR is halved.
    pub lr_patience: usize,
    /// Epochs without validation improvement before training stops.
    pub stop_patience: usize,
    pub lr_factor: f64,
    pub min_improvement: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_epochs: 20,
            initial_lr: 1e-3,
            lr_patience: 15,
            stop_patience: 30,
            lr_factor: 0.5,
            min_improvement: 1e-4,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} is not usable",
                self.initial_lr
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must be in [0, 1)".into()));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor <= 1.0) {
            return Err(Error::Config("lr_factor must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// A model whose flat parameter tensors the optimizer can update.
pub trait Trainable: Clone {
    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;
    fn parameter_sizes(&self) -> Vec<usize>;
    fn is_finite(&self) -> bool;
}

impl Trainable for Network {
    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        Network::parameters_mut(self).into()
    }

    fn parameter_sizes(&self) -> Vec<usize> {
        self.parameters().iter().map(|p| p.len()).collect()
    }

    fn is_finite(&self) -> bool {
        Network::is_finite(self)
    }
}

impl Trainable for AnnNetwork {
    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        AnnNetwork::parameters_mut(self).into()
    }

    fn parameter_sizes(&self) -> Vec<usize> {
        self.parameters().iter().map(|p| p.len()).collect()
    }

    fn is_finite(&self) -> bool {
        AnnNetwork::is_finite(self)
    }
}

pub(crate) fn mix_seed(a: u64, b: u64, c: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ c.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splits `0..n` into shuffled (train, validation) index sets.
fn split_indices(n: usize, cfg: &TrainingConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1, 0)));
    let n_val = if n >= 2 {
        ((n as f64 * cfg.validation_fraction).round() as usize).min(n - 1)
    } else {
        0
    };
    let train = idx.split_off(n_val);
    (train, idx)
}

/// Generic training loop over `n_items` indexed examples.
///
/// `batch_step` returns the mean loss and gradients of a batch (indices into
/// the item list, plus the epoch number); `val_loss` scores held-out indices.
pub fn fit<M, B, V>(
    model: &mut M,
    n_items: usize,
    cfg: &TrainingConfig,
    mut batch_step: B,
    mut val_loss: V,
) -> Result<History>
where
    M: Trainable,
    B: FnMut(&M, &[usize], usize) -> Result<(f64, Vec<Vec<f64>>)>,
    V: FnMut(&M, &[usize]) -> Result<f64>,
{
    cfg.validate()?;
    if n_items == 0 {
        return Err(Error::Argument("no training examples".into()));
    }
    let (mut train_idx, val_idx) = split_indices(n_items, cfg);
    let mut adam = Adam::new(&model.parameter_sizes());
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 2, 0));
    let mut lr = cfg.initial_lr;
    let mut history = History::default();
    let mut best = (f64::INFINITY, model.clone());
    let (mut since_lr_cut, mut since_best) = (0, 0);

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in train_idx.chunks(cfg.batch_size).enumerate() {
            let (loss, grads) = batch_step(model, chunk, epoch)?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b, lr });
            }
            let grads: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
            adam.step(&mut model.parameters_mut(), &grads, lr)?;
            loss_sum += loss;
            batches += 1;
        }
        if !model.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: batches,
                lr,
            });
        }
        let train_loss = loss_sum / batches as f64;
        let val = if val_idx.is_empty() {
            train_loss
        } else {
            val_loss(model, &val_idx)?
        };
        if !val.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: batches,
                lr,
            });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val,
            lr,
        });
        if val < best.0 - cfg.min_improvement {
            best = (val, model.clone());
            history.best_epoch = epoch;
            since_lr_cut = 0;
            since_best = 0;
        } else {
            since_lr_cut += 1;
            since_best += 1;
            if since_best >= cfg.stop_patience {
                history.stopped_early = epoch + 1 < cfg.max_epochs;
                break;
            }
            if since_lr_cut >= cfg.lr_patience {
                lr *= cfg.lr_factor;
                since_lr_cut = 0;
            }
        }
    }
    *model = best.1;
    Ok(history)
}

/// Encodes one patch into a training sample.
pub(crate) fn make_sample(enc: &EncodingConfig, patch: &Patch, seed: u64) -> Result<Sample> {
    let p = patch.size;
    let input = enc.encode_input(&patch.values, p, p, seed)?;
    let target = enc.encode_target(&patch.flags, p, p)?;
    let valid = if patch.valid.iter().all(|v| *v) {
        None
    } else {
        Some(patch.valid.clone())
    };
    Ok(Sample { input, target, valid })
}

pub(crate) const VALIDATION_STREAM: u64 = u64::MAX;

/// Trains a spiking network on normalized patches with surrogate-gradient BPTT.
pub fn train(network: &mut Network, patches: &[Patch], cfg: &TrainingConfig, enc: &EncodingConfig) -> Result<History> {
    enc.validate()?;
    let p = patches
        .first()
        .map(|p| p.size)
        .ok_or_else(|| Error::Argument("no training patches".into()))?;
    let nc = &network.config;
    if nc.input_width != enc.method.input_width(p) || nc.output_width != enc.method.output_width(p) {
        return Err(Error::Shape(format!(
            "network {}->{} does not match {} on {p}-channel patches",
            nc.input_width, nc.output_width, enc.method
        )));
    }
    let loss = LossConfig::for_method(enc.method);
    fit(
        network,
        patches.len(),
        cfg,
        |net, batch, epoch| {
            let samples = batch
                .iter()
                .map(|i| make_sample(enc, &patches[*i], mix_seed(enc.rng_seed, epoch as u64, *i as u64)))
                .collect::<Result<Vec<_>>>()?;
            let (l, g) = bptt_grads(net, &samples, &loss, SpikeFn::Heaviside, ResetGrad::Detached)?;
            Ok((l, g.0.into()))
        },
        |net, val| {
            let mut total = 0.0;
            for i in val {
                let s = make_sample(enc, &patches[*i], mix_seed(enc.rng_seed, VALIDATION_STREAM, *i as u64))?;
                let trace = net.forward_trace(&s.input, SpikeFn::Heaviside)?;
                total += loss.loss(&trace.output, &s.target, s.valid.as_deref())?;
            }
            Ok(total / val.len() as f64)
        },
    )
}

/// Trains the ANN baseline on raw normalized patch columns.
pub fn ann_train(ann: &mut AnnNetwork, patches: &[Patch], cfg: &TrainingConfig) -> Result<History> {
    if patches.is_empty() {
        return Err(Error::Argument("no training patches".into()));
    }
    let refs = |idx: &[usize]| -> Vec<&Patch> { idx.iter().map(|i| &patches[*i]).collect() };
    fit(
        ann,
        patches.len(),
        cfg,
        |m, batch, _| m.bce_and_grads(&refs(batch)),
        |m, val| m.bce_and_grads(&refs(val)).map(|(l, _)| l),
    )
}
