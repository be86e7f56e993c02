//! Spike encoders and decoders.
//!
//! A patch is read as a multivariate time series: frequency channels are the
//! variates and the patch's time axis is unrolled into the network's
//! simulation. Each original time step is expanded into `exposure` simulation
//! slots, so a patch of `T` time steps runs for `T * exposure` network steps.

pub mod delta;
pub mod latency;
pub mod raster;
pub mod rate;
pub mod step_forward;
mod train;

pub use train::SpikeTrain;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_EXPOSURE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingMethod {
    Latency,
    Rate,
    Delta,
    SfFirst,
    SfDirect,
    SfLatency,
}

impl EncodingMethod {
    pub const ALL: [EncodingMethod; 6] = [
        EncodingMethod::Latency,
        EncodingMethod::Rate,
        EncodingMethod::Delta,
        EncodingMethod::SfFirst,
        EncodingMethod::SfDirect,
        EncodingMethod::SfLatency,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EncodingMethod::Latency => "latency",
            EncodingMethod::Rate => "rate",
            EncodingMethod::Delta => "delta",
            EncodingMethod::SfFirst => "sf-first",
            EncodingMethod::SfDirect => "sf-direct",
            EncodingMethod::SfLatency => "sf-latency",
        }
    }

    pub fn step_forward_mode(&self) -> Option<step_forward::ExposureMode> {
        match self {
            EncodingMethod::SfFirst => Some(step_forward::ExposureMode::First),
            EncodingMethod::SfDirect => Some(step_forward::ExposureMode::Direct),
            EncodingMethod::SfLatency => Some(step_forward::ExposureMode::Latency),
            _ => None,
        }
    }

    /// Whether targets and decoding follow the latency rule.
    pub fn uses_latency_targets(&self) -> bool {
        matches!(self, EncodingMethod::Latency) || self.step_forward_mode().is_some()
    }

    /// Smallest usable exposure.
    pub fn min_exposure(&self) -> usize {
        if self.uses_latency_targets() {
            2
        } else {
            1
        }
    }

    /// Network input width for `freq_channels` spectrogram channels.
    pub fn input_width(&self, freq_channels: usize) -> usize {
        match self {
            EncodingMethod::Latency | EncodingMethod::Rate => freq_channels,
            _ => 2 * freq_channels,
        }
    }

    /// Network output width for `freq_channels` spectrogram channels.
    pub fn output_width(&self, freq_channels: usize) -> usize {
        match self {
            EncodingMethod::Delta => 2 * freq_channels,
            _ => freq_channels,
        }
    }
}

impl fmt::Display for EncodingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EncodingMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown encoding method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingConfig {
    pub method: EncodingMethod,
    pub exposure: usize,
    pub sf_threshold: f64,
    pub delta_threshold: f64,
    pub rate_high: f64,
    pub rate_low: f64,
    pub rate_decode_threshold: f64,
    pub rng_seed: u64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            method: EncodingMethod::Latency,
            exposure: 4,
            sf_threshold: 0.1,
            delta_threshold: 0.1,
            rate_high: 0.8,
            rate_low: 0.2,
            rate_decode_threshold: 0.75,
            rng_seed: 0,
        }
    }
}

impl EncodingConfig {
    pub fn new(method: EncodingMethod, exposure: usize) -> Self {
        Self {
            method,
            exposure,
            ..Self::default()
        }
    }

    /// Exposure actually used by the encoder; delta-modulation always runs at 1.
    pub fn effective_exposure(&self) -> usize {
        match self.method {
            EncodingMethod::Delta => 1,
            _ => self.exposure,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.effective_exposure();
        if e < self.method.min_exposure() || e > MAX_EXPOSURE {
            return Err(Error::Config(format!(
                "exposure {e} outside [{}, {MAX_EXPOSURE}] for {}",
                self.method.min_exposure(),
                self.method
            )));
        }
        for (name, v) in [
            ("sf_threshold", self.sf_threshold),
            ("delta_threshold", self.delta_threshold),
            ("rate_high", self.rate_high),
            ("rate_low", self.rate_low),
            ("rate_decode_threshold", self.rate_decode_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} = {v} outside (0, 1)")));
            }
        }
        Ok(())
    }

    /// Encodes a `channels x steps` patch (row-major, values in `[0, 1]`) into
    /// the network's input train. `seed` only matters for rate encoding.
    pub fn encode_input(&self, values: &[f32], channels: usize, steps: usize, seed: u64) -> Result<SpikeTrain> {
        self.validate()?;
        check_len(values.len(), channels, steps)?;
        let e = self.effective_exposure();
        match self.method {
            EncodingMethod::Latency => latency::encode(values, channels, steps, e),
            EncodingMethod::Rate => Ok(rate::encode(values, channels, steps, e, seed)),
            EncodingMethod::Delta => Ok(delta::encode(values, channels, steps, self.delta_threshold)),
            m => step_forward::encode(
                values,
                channels,
                steps,
                self.sf_threshold,
                m.step_forward_mode().expect("step-forward method"),
                e,
            ),
        }
    }

    /// Builds the training target for a `channels x steps` boolean mask.
    pub fn encode_target(&self, flags: &[bool], channels: usize, steps: usize) -> Result<Target> {
        self.validate()?;
        check_len(flags.len(), channels, steps)?;
        let e = self.effective_exposure();
        Ok(match self.method {
            EncodingMethod::Rate => Target::Counts(rate::encode_target(
                flags,
                channels,
                steps,
                e,
                self.rate_high,
                self.rate_low,
            )),
            EncodingMethod::Delta => Target::Spikes(delta::encode_target(flags, channels, steps)),
            _ => Target::Spikes(latency::encode_target(flags, channels, steps, e)?),
        })
    }

    /// Decodes network output into a `channels x steps` mask plus per-pixel scores.
    pub fn decode(&self, output: &SpikeTrain, channels: usize) -> Result<Decoded> {
        let e = self.effective_exposure();
        if output.exposure() != e || output.channels() != self.method.output_width(channels) {
            return Err(Error::Shape(format!(
                "output train {}x{}x{} does not fit {} with {channels} channels",
                output.channels(),
                output.steps(),
                output.exposure(),
                self.method
            )));
        }
        Ok(match self.method {
            EncodingMethod::Rate => rate::decode(output, self.rate_decode_threshold),
            EncodingMethod::Delta => delta::decode(output, channels),
            _ => latency::decode(output),
        })
    }
}

fn check_len(len: usize, channels: usize, steps: usize) -> Result<()> {
    if len != channels * steps {
        return Err(Error::Shape(format!(
            "{len} elements for {channels} channels x {steps} steps"
        )));
    }
    Ok(())
}

/// What the network is trained to emit.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Exact spike trains (latency, step-forward and delta families).
    Spikes(SpikeTrain),
    /// Desired spike count per `(channel, step)`, row-major (rate family).
    Counts(CountTarget),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountTarget {
    pub channels: usize,
    pub steps: usize,
    pub exposure: usize,
    pub counts: Vec<f64>,
}

impl Target {
    pub fn channels(&self) -> usize {
        match self {
            Target::Spikes(s) => s.channels(),
            Target::Counts(c) => c.channels,
        }
    }
}

/// Decoder output: a boolean mask and a continuous score per pixel, both
/// row-major `channels x steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub flags: Vec<bool>,
    pub scores: Vec<f64>,
}
