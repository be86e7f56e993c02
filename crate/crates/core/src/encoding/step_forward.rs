//! Step-forward coding against a running baseline, with three ways of laying
//! the resulting spikes out over the exposure window.
//!
//! The baseline starts at 0 and moves by exactly one threshold per spike, so
//! after a channel is processed it equals `threshold * (ups - downs)`.
//! Positive spikes occupy channels `0..F`, negative spikes `F..2F`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SpikeTrain;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExposureMode {
    /// Spike on the first slot of the window, silence after.
    First,
    /// Spike repeated on every slot.
    Direct,
    /// Slot 0 where a spike is present, the final slot otherwise.
    Latency,
}

impl fmt::Display for ExposureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExposureMode::First => "first",
            ExposureMode::Direct => "direct",
            ExposureMode::Latency => "latency",
        })
    }
}

impl FromStr for ExposureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(ExposureMode::First),
            "direct" => Ok(ExposureMode::Direct),
            "latency" => Ok(ExposureMode::Latency),
            other => Err(Error::Config(format!("unknown exposure mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Up,
    Down,
}

/// Runs the step-forward rule over one channel. Returns the spike (if any)
/// per step and the final baseline.
pub fn encode_channel(signal: &[f64], threshold: f64) -> (Vec<Option<Polarity>>, f64) {
    let mut base = 0.0;
    let spikes = signal
        .iter()
        .map(|x| {
            if *x > base + threshold {
                base += threshold;
                Some(Polarity::Up)
            } else if *x < base - threshold {
                base -= threshold;
                Some(Polarity::Down)
            } else {
                None
            }
        })
        .collect();
    (spikes, base)
}

fn place(train: &mut SpikeTrain, channel: usize, step: usize, spike: bool, mode: ExposureMode) {
    let e = train.exposure();
    match mode {
        ExposureMode::First => {
            if spike {
                train.set(channel, step, 0, true);
            }
        }
        ExposureMode::Direct => {
            if spike {
                (0..e).for_each(|slot| train.set(channel, step, slot, true));
            }
        }
        ExposureMode::Latency => {
            train.set(channel, step, if spike { 0 } else { e - 1 }, true);
        }
    }
}

pub fn encode(
    values: &[f32],
    channels: usize,
    steps: usize,
    threshold: f64,
    mode: ExposureMode,
    exposure: usize,
) -> Result<SpikeTrain> {
    if exposure < 2 {
        return Err(Error::Config(format!(
            "step-forward coding needs exposure >= 2, got {exposure}"
        )));
    }
    let mut train = SpikeTrain::zeros(2 * channels, steps, exposure);
    for c in 0..channels {
        let signal: Vec<f64> = values[c * steps..(c + 1) * steps].iter().map(|v| *v as f64).collect();
        let (spikes, _) = encode_channel(&signal, threshold);
        for (t, s) in spikes.into_iter().enumerate() {
            place(&mut train, c, t, s == Some(Polarity::Up), mode);
            place(&mut train, c + channels, t, s == Some(Polarity::Down), mode);
        }
    }
    Ok(train)
}
