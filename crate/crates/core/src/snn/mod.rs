//! Leaky integrate-and-fire network, surrogate-gradient BPTT and training.
//!
//! The network is two dense layers of LIF neurons with no recurrence. At
//! every simulation slot the input spikes drive the hidden layer and the hidden
//! spikes drive the output layer within the same slot.

mod adam;
mod ann;
mod bptt;
mod checkpoint;
mod train;

pub use adam::Adam;
pub use ann::{AnnNetwork, ANN_DECISION_THRESHOLD};
pub use bptt::{bptt_grads, Gradients, ResetGrad, Sample, SpikeFn, Trace};
pub use checkpoint::{read_checkpoint, read_history_csv, write_checkpoint, write_history_csv, Checkpoint};
pub use train::{ann_train, fit, train, EpochRecord, History, Trainable, TrainingConfig};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{EncodingMethod, SpikeTrain};
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN_WIDTH: usize = 128;

/// One LIF update with reset by subtraction:
/// `u_pre = beta * u + current`, spike when `u_pre >= threshold`,
/// `u' = u_pre - spike * threshold`.
pub fn lif_step(u: f64, current: f64, beta: f64, threshold: f64) -> (bool, f64) {
    let pre = beta * u + current;
    let spike = pre >= threshold;
    (spike, if spike { pre - threshold } else { pre })
}

/// Arctangent surrogate derivative of the Heaviside spike at membrane offset
/// `x = u_pre - threshold`: `(alpha / 2) / (1 + (pi * alpha * x / 2)^2)`.
/// Peaks at `alpha / 2` on the threshold.
pub fn surrogate_grad(x: f64, alpha: f64) -> f64 {
    let z = PI * alpha * x / 2.0;
    (alpha / 2.0) / (1.0 + z * z)
}

/// The smooth spike whose derivative is [`surrogate_grad`]:
/// `1/2 + atan(pi * alpha * x / 2) / pi`.
pub fn relaxed_spike(x: f64, alpha: f64) -> f64 {
    0.5 + (PI * alpha * x / 2.0).atan() / PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_width: usize,
    pub hidden_width: usize,
    pub output_width: usize,
    pub beta: f64,
    pub threshold: f64,
    pub surrogate_slope: f64,
}

impl NetworkConfig {
    /// Widths for an encoding applied to patches of `freq_channels` rows.
    pub fn for_method(method: EncodingMethod, freq_channels: usize, beta: f64) -> Self {
        Self {
            input_width: method.input_width(freq_channels),
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            output_width: method.output_width(freq_channels),
            beta,
            threshold: 1.0,
            surrogate_slope: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.hidden_width == 0 || self.output_width == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(self.threshold > 0.0 && self.surrogate_slope > 0.0) {
            return Err(Error::Config("threshold and surrogate slope must be positive".into()));
        }
        Ok(())
    }
}

/// Fully connected layer, `weights` row-major `[outputs x inputs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `+-1/sqrt(fan_in)` for weights and biases.
    pub fn uniform<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
        let weights = draw(inputs * outputs);
        let bias = draw(outputs);
        Self {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    /// `out = W x + b`, skipping zero inputs.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (o, acc) in out.iter_mut().enumerate() {
                *acc += self.weights[o * self.inputs + i] * xi;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Membrane potentials of both layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LifState {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl LifState {
    pub fn new(config: &NetworkConfig) -> Self {
        Self {
            hidden: vec![0.0; config.hidden_width],
            output: vec![0.0; config.output_width],
        }
    }

    pub fn reset(&mut self) {
        self.hidden.iter_mut().for_each(|u| *u = 0.0);
        self.output.iter_mut().for_each(|u| *u = 0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

impl Network {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = DenseLayer::uniform(config.input_width, config.hidden_width, &mut rng);
        let output = DenseLayer::uniform(config.hidden_width, config.output_width, &mut rng);
        Ok(Self { config, hidden, output })
    }

    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            hidden: DenseLayer::zeros(config.input_width, config.hidden_width),
            output: DenseLayer::zeros(config.hidden_width, config.output_width),
            config,
        })
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

    pub(crate) fn check_input(&self, input: &SpikeTrain) -> Result<()> {
        if input.channels() != self.config.input_width {
            return Err(Error::Shape(format!(
                "input has {} channels, network expects {}",
                input.channels(),
                self.config.input_width
            )));
        }
        Ok(())
    }

    /// Runs the network over a whole input train from a freshly reset state.
    pub fn forward(&self, input: &SpikeTrain) -> Result<SpikeTrain> {
        self.check_input(input)?;
        let cfg = &self.config;
        let mut state = LifState::new(cfg);
        let mut out = SpikeTrain::zeros(cfg.output_width, input.steps(), input.exposure());
        let mut x = vec![0.0; cfg.input_width];
        let mut c1 = vec![0.0; cfg.hidden_width];
        let mut s1 = vec![0.0; cfg.hidden_width];
        let mut c2 = vec![0.0; cfg.output_width];
        for k in 0..input.slots() {
            for (xi, si) in x.iter_mut().zip(input.slot(k)) {
                *xi = *si as f64;
            }
            self.hidden.apply(&x, &mut c1);
            for h in 0..cfg.hidden_width {
                let (s, u) = lif_step(state.hidden[h], c1[h], cfg.beta, cfg.threshold);
                state.hidden[h] = u;
                s1[h] = s as u8 as f64;
            }
            self.output.apply(&s1, &mut c2);
            let (t, e) = (k / input.exposure(), k % input.exposure());
            for o in 0..cfg.output_width {
                let (s, u) = lif_step(state.output[o], c2[o], cfg.beta, cfg.threshold);
                state.output[o] = u;
                if s {
                    out.set(o, t, e, true);
                }
            }
        }
        Ok(out)
    }
}
