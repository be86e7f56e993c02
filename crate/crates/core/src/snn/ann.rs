//! Non-spiking baseline: a two-layer perceptron applied to each time column
//! of a patch, ReLU hidden units and sigmoid outputs trained with binary
//! cross-entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DenseLayer;
use crate::data::Patch;
use crate::error::{Error, Result};

/// A pixel is flagged when its sigmoid output is strictly above this.
pub const ANN_DECISION_THRESHOLD: f64 = 0.5;

const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnNetwork {
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl AnnNetwork {
    pub fn new(channels: usize, hidden: usize, seed: u64) -> Result<Self> {
        if channels == 0 || hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            hidden: DenseLayer::uniform(channels, hidden, &mut rng),
            output: DenseLayer::uniform(hidden, channels, &mut rng),
        })
    }

    pub fn zeros(channels: usize, hidden: usize) -> Self {
        Self {
            hidden: DenseLayer::zeros(channels, hidden),
            output: DenseLayer::zeros(hidden, channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.hidden.inputs
    }

    pub fn parameters(&self) -> [&[f64]; 4] {
        [
            &self.hidden.weights,
            &self.hidden.bias,
            &self.output.weights,
            &self.output.bias,
        ]
    }

    pub fn parameters_mut(&mut self) -> [&mut [f64]; 4] {
        [
            &mut self.hidden.weights,
            &mut self.hidden.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.hidden.is_finite() && self.output.is_finite()
    }

    fn column(values: &[f32], channels: usize, steps: usize, t: usize) -> Vec<f64> {
        (0..channels).map(|c| values[c * steps + t] as f64).collect()
    }

    /// Flag probabilities for a `[channels x steps]` block, same layout.
    pub fn predict(&self, values: &[f32], channels: usize, steps: usize) -> Result<Vec<f64>> {
        if channels != self.channels() || values.len() != channels * steps {
            return Err(Error::Shape(format!(
                "{} values as {channels}x{steps}, model takes {} channels",
                values.len(),
                self.channels()
            )));
        }
        let mut out = vec![0.0; channels * steps];
        let mut h = vec![0.0; self.hidden.outputs];
        let mut z = vec![0.0; channels];
        for t in 0..steps {
            self.hidden.apply(&Self::column(values, channels, steps, t), &mut h);
            h.iter_mut().for_each(|v| *v = v.max(0.0));
            self.output.apply(&h, &mut z);
            for c in 0..channels {
                out[c * steps + t] = sigmoid(z[c]);
            }
        }
        Ok(out)
    }

    /// Mean binary cross-entropy per patch (over valid pixels), averaged over
    /// the batch, with its gradient.
    pub fn bce_and_grads(&self, batch: &[&Patch]) -> Result<(f64, Vec<Vec<f64>>)> {
        if batch.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        let (n_in, n_h) = (self.hidden.inputs, self.hidden.outputs);
        let mut grads: Vec<Vec<f64>> = self.parameters().iter().map(|p| vec![0.0; p.len()]).collect();
        let mut total = 0.0;
        let mut h = vec![0.0; n_h];
        let mut z = vec![0.0; n_in];
        let mut dh = vec![0.0; n_h];
        for patch in batch {
            let p = patch.size;
            if p != n_in {
                return Err(Error::Shape(format!("patch of {p} channels, model takes {n_in}")));
            }
            let kept = patch.valid.iter().filter(|v| **v).count();
            if kept == 0 {
                continue;
            }
            let w = 1.0 / kept as f64;
            let mut loss = 0.0;
            for t in 0..p {
                let x = Self::column(&patch.values, p, p, t);
                self.hidden.apply(&x, &mut h);
                h.iter_mut().for_each(|v| *v = v.max(0.0));
                self.output.apply(&h, &mut z);
                dh.iter_mut().for_each(|v| *v = 0.0);
                for c in 0..p {
                    let i = c * p + t;
                    if !patch.valid[i] {
                        continue;
                    }
                    let y = patch.flags[i] as u8 as f64;
                    let q = sigmoid(z[c]).clamp(PROB_EPS, 1.0 - PROB_EPS);
                    loss -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
                    let dz = (sigmoid(z[c]) - y) * w;
                    grads[3][c] += dz;
                    for j in 0..n_h {
                        grads[2][c * n_h + j] += dz * h[j];
                        dh[j] += dz * self.output.weights[c * n_h + j];
                    }
                }
                for j in 0..n_h {
                    if h[j] <= 0.0 {
                        continue;
                    }
                    grads[1][j] += dh[j];
                    for (i, xi) in x.iter().enumerate() {
                        grads[0][j * n_in + i] += dh[j] * xi;
                    }
                }
            }
            total += loss * w;
        }
        let n = batch.len() as f64;
        grads.iter_mut().flatten().for_each(|g| *g /= n);
        Ok((total / n, grads))
    }
}
