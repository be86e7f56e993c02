//! Spectrogram and mask data model, normalization, patching, persistence and
//! the synthetic dataset generator.
//!
//! All 2-D arrays are stored row-major as `[freq_channel][time_step]`.

mod generator;
mod io;
mod patch;

pub use generator::{generate_synthetic, GeneratorConfig, RfiClass, RfiEvent, RfiRates};
pub use io::{
    load_dataset, read_mask, read_spectrogram, save_dataset, write_mask, write_spectrogram, Dataset, DatasetItem,
    DatasetManifest, ManifestItem, MANIFEST_FILE,
};
pub use patch::{patch, stitch, stitch_values, Patch, PatchGrid, DEFAULT_PATCH_SIZE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observation metadata carried alongside each spectrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramMeta {
    pub freq_start_mhz: f64,
    pub freq_end_mhz: f64,
    pub integration_seconds: f64,
    pub baseline_id: i64,
}

impl Default for SpectrogramMeta {
    fn default() -> Self {
        // HERA-like band and cadence.
        Self {
            freq_start_mhz: 105.0,
            freq_end_mhz: 195.0,
            integration_seconds: 3.52,
            baseline_id: 0,
        }
    }
}

/// Magnitude image over frequency x time. One baseline per spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    freq_channels: usize,
    time_steps: usize,
    values: Vec<f32>,
    pub meta: SpectrogramMeta,
}

impl Spectrogram {
    /// Builds a spectrogram, rejecting empty shapes and negative or non-finite magnitudes.
    pub fn new(freq_channels: usize, time_steps: usize, values: Vec<f32>, meta: SpectrogramMeta) -> Result<Self> {
        if freq_channels == 0 || time_steps == 0 {
            return Err(Error::Validation(format!(
                "spectrogram shape {freq_channels}x{time_steps} is empty"
            )));
        }
        if values.len() != freq_channels * time_steps {
            return Err(Error::Shape(format!(
                "{} values for a {freq_channels}x{time_steps} spectrogram",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite magnitude at index {i}")));
        }
        if let Some(i) = values.iter().position(|v| *v < 0.0) {
            return Err(Error::Validation(format!("negative magnitude at index {i}")));
        }
        Ok(Self {
            freq_channels,
            time_steps,
            values,
            meta,
        })
    }

    pub fn freq_channels(&self) -> usize {
        self.freq_channels
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.freq_channels, self.time_steps)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, freq: usize, time: usize) -> f32 {
        self.values[freq * self.time_steps + time]
    }
}

/// Boolean RFI flags aligned with a [`Spectrogram`]. Ground truth and
/// predictions share this type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RfiMask {
    freq_channels: usize,
    time_steps: usize,
    flags: Vec<bool>,
}

impl RfiMask {
    pub fn new(freq_channels: usize, time_steps: usize, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != freq_channels * time_steps {
            return Err(Error::Shape(format!(
                "{} flags for a {freq_channels}x{time_steps} mask",
                flags.len()
            )));
        }
        Ok(Self {
            freq_channels,
            time_steps,
            flags,
        })
    }

    pub fn empty(freq_channels: usize, time_steps: usize) -> Self {
        Self {
            freq_channels,
            time_steps,
            flags: vec![false; freq_channels * time_steps],
        }
    }

    pub fn freq_channels(&self) -> usize {
        self.freq_channels
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.freq_channels, self.time_steps)
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn get(&self, freq: usize, time: usize) -> bool {
        self.flags[freq * self.time_steps + time]
    }

    pub fn set(&mut self, freq: usize, time: usize, flag: bool) {
        self.flags[freq * self.time_steps + time] = flag;
    }

    pub fn count_flagged(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Log-compresses magnitudes and min-max scales them into `[0, 1]`, per
/// spectrogram. A constant spectrogram maps to all zeros.
pub fn normalize(spec: &Spectrogram) -> Result<Spectrogram> {
    if let Some(i) = spec.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite magnitude at index {i}")));
    }
    let logged: Vec<f64> = spec.values.iter().map(|v| (*v as f64).ln_1p()).collect();
    let (min, max) = logged.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    let range = max - min;
    let values = if range > 0.0 {
        logged
            .iter()
            .map(|v| (((v - min) / range) as f32).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; logged.len()]
    };
    Ok(Spectrogram {
        freq_channels: spec.freq_channels,
        time_steps: spec.time_steps,
        values,
        meta: spec.meta.clone(),
    })
}

/// Fraction of flagged pixels over every mask pixel.
pub fn contamination_stats<'a>(masks: impl IntoIterator<Item = &'a RfiMask>) -> Result<f64> {
    let (flagged, total) = masks
        .into_iter()
        .fold((0usize, 0usize), |(f, t), m| (f + m.count_flagged(), t + m.flags.len()));
    if total == 0 {
        return Err(Error::Argument("contamination of an empty dataset".into()));
    }
    Ok(flagged as f64 / total as f64)
}
