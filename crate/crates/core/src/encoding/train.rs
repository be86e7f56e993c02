use crate::error::{Error, Result};

/// Binary spike tensor of shape `channels x steps x exposure`.
///
/// Stored slot-major: all channels of simulation slot `k = step * exposure + e`
/// are contiguous, which is the order the network consumes them in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeTrain {
    channels: usize,
    steps: usize,
    exposure: usize,
    data: Vec<u8>,
}

impl SpikeTrain {
    pub fn zeros(channels: usize, steps: usize, exposure: usize) -> Self {
        Self {
            channels,
            steps,
            exposure,
            data: vec![0; channels * steps * exposure],
        }
    }

    /// Builds a train from slot-major 0/1 data.
    pub fn from_slots(channels: usize, steps: usize, exposure: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != channels * steps * exposure {
            return Err(Error::Shape(format!(
                "{} entries for a {channels}x{steps}x{exposure} train",
                data.len()
            )));
        }
        if data.iter().any(|v| *v > 1) {
            return Err(Error::Validation("spike trains are binary".into()));
        }
        Ok(Self {
            channels,
            steps,
            exposure,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn exposure(&self) -> usize {
        self.exposure
    }

    /// Total simulation slots, `steps * exposure`.
    pub fn slots(&self) -> usize {
        self.steps * self.exposure
    }

    fn index(&self, channel: usize, step: usize, e: usize) -> usize {
        debug_assert!(channel < self.channels && step < self.steps && e < self.exposure);
        (step * self.exposure + e) * self.channels + channel
    }

    pub fn get(&self, channel: usize, step: usize, e: usize) -> bool {
        self.data[self.index(channel, step, e)] == 1
    }

    pub fn set(&mut self, channel: usize, step: usize, e: usize, spike: bool) {
        let i = self.index(channel, step, e);
        self.data[i] = spike as u8;
    }

    /// All channels at simulation slot `k`.
    pub fn slot(&self, k: usize) -> &[u8] {
        &self.data[k * self.channels..(k + 1) * self.channels]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|v| *v as usize).sum()
    }

    /// Spikes of one channel within one original step, across its exposure slots.
    pub fn window(&self, channel: usize, step: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.exposure).map(move |e| self.get(channel, step, e))
    }

    /// Builds a train from real-valued slot-major outputs by rounding at 0.5.
    pub fn from_real(channels: usize, steps: usize, exposure: usize, values: &[f64]) -> Result<Self> {
        let data = values.iter().map(|v| (*v >= 0.5) as u8).collect();
        Self::from_slots(channels, steps, exposure, data)
    }
}
