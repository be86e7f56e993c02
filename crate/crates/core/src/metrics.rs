//! Per-pixel evaluation metrics.
//!
//! Threshold-free metrics rank pixels by the decoder's continuous score. Ties
//! are grouped: pixels sharing a score enter the curve together.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metrics for one evaluated model. The curve areas are `None` when they are
/// undefined (the labels contain a single class).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub accuracy: f64,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub f1: f64,
    pub n_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Auroc,
    Auprc,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Accuracy, Metric::Auroc, Metric::Auprc, Metric::F1];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Auroc => "auroc",
            Metric::Auprc => "auprc",
            Metric::F1 => "f1",
        }
    }
}

impl EvalRecord {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Accuracy => Some(self.accuracy),
            Metric::Auroc => self.auroc,
            Metric::Auprc => self.auprc,
            Metric::F1 => Some(self.f1),
        }
    }
}

/// Confusion counts over valid pixels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_masks(pred: &[bool], truth: &[bool], valid: Option<&[bool]>) -> Result<Self> {
        if pred.len() != truth.len() || valid.is_some_and(|v| v.len() != pred.len()) {
            return Err(Error::Shape(format!(
                "prediction has {} pixels, truth {}",
                pred.len(),
                truth.len()
            )));
        }
        let mut c = Confusion::default();
        for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
            if valid.is_some_and(|v| !v[i]) {
                continue;
            }
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn accuracy(pred: &[bool], truth: &[bool]) -> Result<f64> {
    Confusion::from_masks(pred, truth, None).map(|c| c.accuracy())
}

pub fn f1(pred: &[bool], truth: &[bool]) -> Result<f64> {
    Confusion::from_masks(pred, truth, None).map(|c| c.f1())
}

/// Cumulative `(tp, fp)` after admitting each distinct score, highest first,
/// with the score itself as threshold.
fn threshold_sweep(scores: &[f64], labels: &[bool]) -> Result<(Vec<(usize, usize, f64)>, usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap_or(Ordering::Equal));
    let positives = labels.iter().filter(|l| **l).count();
    let negatives = labels.len() - positives;
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(rank + 1).is_none_or(|&next| scores[next] != scores[i]);
        if last_of_group {
            points.push((tp, fp, scores[i]));
        }
    }
    Ok((points, positives, negatives))
}

/// ROC curve as `(fpr, tpr, threshold)` points, starting at `(0, 0)` with an
/// infinite threshold.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64, f64)>> {
    let (points, pos, neg) = threshold_sweep(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("ROC needs both classes"));
    }
    let mut curve = vec![(0.0, 0.0, f64::INFINITY)];
    curve.extend(
        points
            .into_iter()
            .map(|(tp, fp, th)| (fp as f64 / neg as f64, tp as f64 / pos as f64, th)),
    );
    Ok(curve)
}

/// Trapezoidal area under the ROC curve.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let curve = roc_curve(scores, labels)?;
    Ok(curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum())
}

/// Precision-recall curve as `(recall, precision)` per distinct threshold,
/// highest threshold first.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (points, pos, _) = threshold_sweep(scores, labels)?;
    if pos == 0 {
        return Err(Error::UndefinedMetric("precision-recall needs positive labels"));
    }
    Ok(points
        .into_iter()
        .map(|(tp, fp, _)| (tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64))
        .collect())
}

/// Step-wise area under the PR curve: `sum (R_n - R_{n-1}) * P_n`.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let curve = pr_curve(scores, labels)?;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for (recall, precision) in curve {
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Full evaluation over valid pixels.
pub fn evaluate(pred: &[bool], scores: &[f64], truth: &[bool], valid: Option<&[bool]>) -> Result<EvalRecord> {
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} pixels",
            scores.len(),
            truth.len()
        )));
    }
    let confusion = Confusion::from_masks(pred, truth, valid)?;
    let keep = |i: &usize| valid.is_none_or(|v| v[*i]);
    let idx: Vec<usize> = (0..truth.len()).filter(keep).collect();
    let s: Vec<f64> = idx.iter().map(|i| scores[*i]).collect();
    let l: Vec<bool> = idx.iter().map(|i| truth[*i]).collect();
    let optional = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(EvalRecord {
        accuracy: confusion.accuracy(),
        auroc: optional(auroc(&s, &l))?,
        auprc: optional(auprc(&s, &l))?,
        f1: confusion.f1(),
        n_pixels: confusion.total(),
    })
}
