//! Recorded forward pass and backpropagation through time.
//!
//! The spike nonlinearity is replaced by the arctangent surrogate in the
//! backward pass. Membrane carries a factor `beta` from one slot to the next.
//! In training the reset term is detached; the gradient check attaches it so
//! the relaxed network's gradient is exact.

use super::{relaxed_spike, surrogate_grad, Network};
use crate::encoding::{SpikeTrain, Target};
use crate::error::{Error, Result};
use crate::losses::LossConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeFn {
    /// Exact threshold spikes.
    Heaviside,
    /// Smooth arctangent spikes; the whole map is differentiable.
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetGrad {
    Detached,
    Attached,
}

/// Quantities recorded during the forward pass, slot-major.
#[derive(Debug, Clone)]
pub struct Trace {
    pub slots: usize,
    pub hidden_pre: Vec<f64>,
    pub hidden_spikes: Vec<f64>,
    pub output_pre: Vec<f64>,
    /// Output activations, the same layout as an output [`SpikeTrain`].
    pub output: Vec<f64>,
}

/// Parameter gradients, shaped like [`Network::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub [Vec<f64>; 4]);

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients(net.parameters().map(|p| vec![0.0; p.len()]))
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.0.iter_mut().flatten().for_each(|x| *x *= k);
    }

    pub fn as_slices(&self) -> Vec<&[f64]> {
        self.0.iter().map(|v| v.as_slice()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One training example: encoded input, target and optional validity mask
/// (`pixel_channels x steps`).
#[derive(Debug, Clone)]
pub struct Sample {
    pub input: SpikeTrain,
    pub target: Target,
    pub valid: Option<Vec<bool>>,
}

impl Network {
    /// Forward pass that records membranes for backpropagation.
    pub fn forward_trace(&self, input: &SpikeTrain, spike_fn: SpikeFn) -> Result<Trace> {
        self.check_input(input)?;
        let cfg = &self.config;
        let (h_n, o_n) = (cfg.hidden_width, cfg.output_width);
        let slots = input.slots();
        let mut trace = Trace {
            slots,
            hidden_pre: vec![0.0; slots * h_n],
            hidden_spikes: vec![0.0; slots * h_n],
            output_pre: vec![0.0; slots * o_n],
            output: vec![0.0; slots * o_n],
        };
        let spike = |x: f64| match spike_fn {
            SpikeFn::Heaviside => (x >= 0.0) as u8 as f64,
            SpikeFn::Relaxed => relaxed_spike(x, cfg.surrogate_slope),
        };
        let mut u1 = vec![0.0; h_n];
        let mut u2 = vec![0.0; o_n];
        let mut x = vec![0.0; cfg.input_width];
        let mut c1 = vec![0.0; h_n];
        let mut c2 = vec![0.0; o_n];
        for k in 0..slots {
            for (xi, si) in x.iter_mut().zip(input.slot(k)) {
                *xi = *si as f64;
            }
            self.hidden.apply(&x, &mut c1);
            let pre1 = &mut trace.hidden_pre[k * h_n..(k + 1) * h_n];
            let s1 = &mut trace.hidden_spikes[k * h_n..(k + 1) * h_n];
            for h in 0..h_n {
                pre1[h] = cfg.beta * u1[h] + c1[h];
                s1[h] = spike(pre1[h] - cfg.threshold);
                u1[h] = pre1[h] - s1[h] * cfg.threshold;
            }
            self.output.apply(s1, &mut c2);
            let pre2 = &mut trace.output_pre[k * o_n..(k + 1) * o_n];
            let s2 = &mut trace.output[k * o_n..(k + 1) * o_n];
            for o in 0..o_n {
                pre2[o] = cfg.beta * u2[o] + c2[o];
                s2[o] = spike(pre2[o] - cfg.threshold);
                u2[o] = pre2[o] - s2[o] * cfg.threshold;
            }
        }
        Ok(trace)
    }

    /// Relaxed forward pass: real-valued outputs, slot-major.
    pub fn continuous_relaxation_forward(&self, input: &SpikeTrain) -> Result<Vec<f64>> {
        self.forward_trace(input, SpikeFn::Relaxed).map(|t| t.output)
    }

    /// Backpropagates `d_output` (dL/d output, slot-major) through a recorded trace.
    pub fn backward(&self, input: &SpikeTrain, trace: &Trace, d_output: &[f64], reset: ResetGrad) -> Result<Gradients> {
        let cfg = &self.config;
        let (i_n, h_n, o_n) = (cfg.input_width, cfg.hidden_width, cfg.output_width);
        if d_output.len() != trace.slots * o_n {
            return Err(Error::Shape(format!(
                "output gradient has {} entries, expected {}",
                d_output.len(),
                trace.slots * o_n
            )));
        }
        let (alpha, theta, beta) = (cfg.surrogate_slope, cfg.threshold, cfg.beta);
        let mut grads = Gradients::zeros_like(self);
        let [gw1, gb1, gw2, gb2] = &mut grads.0;
        let mut carry1 = vec![0.0; h_n];
        let mut carry2 = vec![0.0; o_n];
        let mut delta2 = vec![0.0; o_n];
        let mut g_s1 = vec![0.0; h_n];
        let mut active = Vec::with_capacity(i_n);
        for k in (0..trace.slots).rev() {
            let pre2 = &trace.output_pre[k * o_n..(k + 1) * o_n];
            let dy = &d_output[k * o_n..(k + 1) * o_n];
            for o in 0..o_n {
                let sg = surrogate_grad(pre2[o] - theta, alpha);
                let through = match reset {
                    ResetGrad::Detached => 1.0,
                    ResetGrad::Attached => 1.0 - theta * sg,
                };
                delta2[o] = dy[o] * sg + carry2[o] * through;
                carry2[o] = beta * delta2[o];
            }
            let s1 = &trace.hidden_spikes[k * h_n..(k + 1) * h_n];
            g_s1.iter_mut().for_each(|g| *g = 0.0);
            for o in 0..o_n {
                let d = delta2[o];
                gb2[o] += d;
                let row = &self.output.weights[o * h_n..(o + 1) * h_n];
                let grow = &mut gw2[o * h_n..(o + 1) * h_n];
                for h in 0..h_n {
                    g_s1[h] += row[h] * d;
                    if s1[h] != 0.0 {
                        grow[h] += d * s1[h];
                    }
                }
            }
            let pre1 = &trace.hidden_pre[k * h_n..(k + 1) * h_n];
            active.clear();
            active.extend(
                input
                    .slot(k)
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| **x != 0)
                    .map(|(i, _)| i),
            );
            for h in 0..h_n {
                let sg = surrogate_grad(pre1[h] - theta, alpha);
                let through = match reset {
                    ResetGrad::Detached => 1.0,
                    ResetGrad::Attached => 1.0 - theta * sg,
                };
                let d = g_s1[h] * sg + carry1[h] * through;
                carry1[h] = beta * d;
                gb1[h] += d;
                let grow = &mut gw1[h * i_n..(h + 1) * i_n];
                for &i in &active {
                    grow[i] += d;
                }
            }
        }
        Ok(grads)
    }
}

/// Mean loss and mean gradient over a batch.
pub fn bptt_grads(
    net: &Network,
    batch: &[Sample],
    loss: &LossConfig,
    spike_fn: SpikeFn,
    reset: ResetGrad,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let mut total = Gradients::zeros_like(net);
    let mut total_loss = 0.0;
    for sample in batch {
        let trace = net.forward_trace(&sample.input, spike_fn)?;
        let (l, d_out) = loss.loss_and_grad(&trace.output, &sample.target, sample.valid.as_deref())?;
        total_loss += l;
        total.add_assign(&net.backward(&sample.input, &trace, &d_out, reset)?);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((total_loss / n, total))
}
