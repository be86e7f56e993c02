//! End-to-end flagging: normalize and tile spectrograms, run a trained model
//! on every patch, stitch the decoded masks and score them.

use crate::data::{normalize, patch, DatasetItem, Patch, PatchGrid, RfiMask};
use crate::encoding::EncodingConfig;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalRecord};
use crate::snn::{AnnNetwork, Network, ANN_DECISION_THRESHOLD};

/// A trained flagger.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Snn { network: Network, encoding: EncodingConfig },
    Ann(AnnNetwork),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Snn { encoding, .. } => encoding.method.as_str(),
            Model::Ann(_) => "ann",
        }
    }
}

/// A normalized spectrogram cut into patches, with its ground truth.
#[derive(Debug, Clone)]
pub struct PreparedItem {
    pub grid: PatchGrid,
    pub patches: Vec<Patch>,
    pub truth: RfiMask,
}

pub fn prepare_item(item: &DatasetItem, patch_size: usize) -> Result<PreparedItem> {
    let spec = normalize(&item.spectrogram)?;
    let (f, t) = spec.shape();
    Ok(PreparedItem {
        grid: PatchGrid::new(f, t, patch_size)?,
        patches: patch(&spec, &item.mask, patch_size)?,
        truth: item.mask.clone(),
    })
}

pub fn prepare_items(items: &[DatasetItem], patch_size: usize) -> Result<Vec<PreparedItem>> {
    items.iter().map(|i| prepare_item(i, patch_size)).collect()
}

/// All training patches of a set of items, in item order.
pub fn prepare_patches(items: &[DatasetItem], patch_size: usize) -> Result<Vec<Patch>> {
    Ok(prepare_items(items, patch_size)?
        .into_iter()
        .flat_map(|p| p.patches)
        .collect())
}

/// Flags and scores for one patch, row-major `size x size`. `seed` drives the
/// rate encoder and is ignored otherwise.
pub fn predict_patch(model: &Model, patch: &Patch, seed: u64) -> Result<(Vec<bool>, Vec<f64>)> {
    let p = patch.size;
    match model {
        Model::Snn { network, encoding } => {
            let input = encoding.encode_input(&patch.values, p, p, seed)?;
            let out = network.forward(&input)?;
            let d = encoding.decode(&out, p)?;
            Ok((d.flags, d.scores))
        }
        Model::Ann(ann) => {
            let scores = ann.predict(&patch.values, p, p)?;
            Ok((scores.iter().map(|s| *s > ANN_DECISION_THRESHOLD).collect(), scores))
        }
    }
}

/// Predicted mask and per-pixel scores for a whole prepared item.
pub fn predict_item(model: &Model, item: &PreparedItem, seed: u64) -> Result<(RfiMask, Vec<f64>)> {
    let mut flags = Vec::with_capacity(item.patches.len());
    let mut scores = Vec::with_capacity(item.patches.len());
    for (k, patch) in item.patches.iter().enumerate() {
        let (f, s) = predict_patch(model, patch, seed.wrapping_add(k as u64))?;
        flags.push(f);
        scores.push(s);
    }
    let origins: Vec<(usize, usize)> = item.patches.iter().map(|p| (p.origin_freq, p.origin_time)).collect();
    let flag_tiles: Vec<_> = origins
        .iter()
        .copied()
        .zip(flags.iter().map(|f| f.as_slice()))
        .collect();
    let score_tiles: Vec<_> = origins
        .iter()
        .copied()
        .zip(scores.iter().map(|s| s.as_slice()))
        .collect();
    let mask = crate::data::stitch(&item.grid, &flag_tiles)?;
    Ok((mask, crate::data::stitch_values(&item.grid, &score_tiles)?))
}

/// Pools every pixel of every item into one [`EvalRecord`].
pub fn evaluate_model(model: &Model, items: &[PreparedItem], seed: u64) -> Result<EvalRecord> {
    if items.is_empty() {
        return Err(Error::Argument("nothing to evaluate".into()));
    }
    let (mut pred, mut scores, mut truth) = (Vec::new(), Vec::new(), Vec::new());
    for (i, item) in items.iter().enumerate() {
        let (mask, s) = predict_item(model, item, seed.wrapping_add((i as u64) << 32))?;
        pred.extend_from_slice(mask.flags());
        scores.extend(s);
        truth.extend_from_slice(item.truth.flags());
    }
    evaluate(&pred, &scores, &truth, None)
}
