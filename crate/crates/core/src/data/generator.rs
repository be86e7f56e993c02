//! Synthetic HERA-like spectrograms with injected RFI.
//!
//! Four analytic event classes are placed uniformly at random on a noisy
//! linear-gradient background. Event counts are Poisson with per-class means,
//! and the means are rescaled until the dataset-level contamination lands
//! within tolerance of the target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::io::{save_dataset, DatasetManifest};
use super::{Dataset, DatasetItem, RfiMask, Spectrogram, SpectrogramMeta};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RfiClass {
    /// Satellite-like: a few channels, every time step.
    NarrowbandPersistent,
    /// Lightning-like: a few time steps, every channel.
    BroadbandTransient,
    /// Ground communication: a few channels over part of the observation.
    NarrowbandTransient,
    /// Impulse blips, at most 3x3 pixels.
    Blip,
}

/// Expected number of events per spectrogram for each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfiRates {
    pub narrowband_persistent: f64,
    pub broadband_transient: f64,
    pub narrowband_transient: f64,
    pub blip: f64,
}

impl RfiRates {
    pub fn zero() -> Self {
        Self {
            narrowband_persistent: 0.0,
            broadband_transient: 0.0,
            narrowband_transient: 0.0,
            blip: 0.0,
        }
    }

    fn as_array(&self) -> [(RfiClass, f64); 4] {
        [
            (RfiClass::NarrowbandPersistent, self.narrowband_persistent),
            (RfiClass::BroadbandTransient, self.broadband_transient),
            (RfiClass::NarrowbandTransient, self.narrowband_transient),
            (RfiClass::Blip, self.blip),
        ]
    }

    fn scaled(&self, k: f64) -> Self {
        Self {
            narrowband_persistent: self.narrowband_persistent * k,
            broadband_transient: self.broadband_transient * k,
            narrowband_transient: self.narrowband_transient * k,
            blip: self.blip * k,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_array().iter().all(|(_, r)| *r == 0.0)
    }
}

impl Default for RfiRates {
    /// Tuned so a 128x128 spectrogram averages roughly 2.8% flagged pixels.
    fn default() -> Self {
        Self {
            narrowband_persistent: 0.8,
            broadband_transient: 0.6,
            narrowband_transient: 1.5,
            blip: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub freq_channels: usize,
    pub time_steps: usize,
    /// Range of the absolute background slope along each axis, as a fraction
    /// of `background_level` across the full axis. Signs are drawn at random.
    pub background_gradient_range: (f64, f64),
    pub background_level: f64,
    pub noise_sigma: f64,
    pub rfi_rates: RfiRates,
    /// Median of the log-normal event amplitude, in units of `background_level`.
    pub rfi_amplitude_median: f64,
    pub rfi_amplitude_sigma: f64,
    pub target_contamination: f64,
    pub contamination_tolerance: f64,
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_train: 40,
            n_test: 10,
            freq_channels: 128,
            time_steps: 128,
            background_gradient_range: (0.0, 0.8),
            background_level: 1.0,
            noise_sigma: 0.1,
            rfi_rates: RfiRates::default(),
            rfi_amplitude_median: 1.0e6,
            rfi_amplitude_sigma: 0.05,
            target_contamination: 0.0276,
            contamination_tolerance: 0.01,
            max_retries: 64,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Dimensions of the simulated HERA set: 420/140 spectrograms of 512x512.
    pub fn hera_scale() -> Self {
        Self {
            n_train: 420,
            n_test: 140,
            freq_channels: 512,
            time_steps: 512,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_train == 0 {
            return bad("n_train must be at least 1".into());
        }
        if self.freq_channels == 0 || self.time_steps == 0 {
            return bad("spectrogram dimensions must be positive".into());
        }
        if !(self.target_contamination > 0.0 && self.target_contamination <= 0.2) {
            return bad(format!(
                "target_contamination {} outside (0, 0.2]",
                self.target_contamination
            ));
        }
        if self
            .rfi_rates
            .as_array()
            .iter()
            .any(|(_, r)| !r.is_finite() || *r < 0.0)
        {
            return bad("rfi_rates must be finite and non-negative".into());
        }
        let (lo, hi) = self.background_gradient_range;
        if !(0.0..=hi).contains(&lo) || hi >= 1.0 {
            return bad(format!(
                "background_gradient_range ({lo}, {hi}) must satisfy 0 <= lo <= hi < 1"
            ));
        }
        if !(self.background_level > 0.0 && self.noise_sigma >= 0.0) {
            return bad("background_level must be positive and noise_sigma non-negative".into());
        }
        if !(self.rfi_amplitude_median > 0.0 && self.rfi_amplitude_sigma >= 0.0) {
            return bad("rfi amplitude parameters must be positive".into());
        }
        if !(self.contamination_tolerance > 0.0) {
            return bad("contamination_tolerance must be positive".into());
        }
        Ok(())
    }
}

/// One injected event: a rectangle `[freq.0, freq.1) x [time.0, time.1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfiEvent {
    pub class: RfiClass,
    pub freq: (usize, usize),
    pub time: (usize, usize),
    pub amplitude: f64,
}

fn sample_event(class: RfiClass, nf: usize, nt: usize, amp: &LogNormal<f64>, rng: &mut ChaCha8Rng) -> RfiEvent {
    let mut span = |len: usize, lo: usize, hi: usize| {
        let w = rng.random_range(lo.min(len)..=hi.min(len)).max(1);
        let start = rng.random_range(0..=len - w);
        (start, start + w)
    };
    let (freq, time) = match class {
        RfiClass::NarrowbandPersistent => (span(nf, 1, 3), (0, nt)),
        RfiClass::BroadbandTransient => ((0, nf), span(nt, 1, 2)),
        RfiClass::NarrowbandTransient => (span(nf, 1, 3), span(nt, (nt / 8).max(1), (nt / 2).max(1))),
        RfiClass::Blip => (span(nf, 1, 3), span(nt, 1, 3)),
    };
    RfiEvent {
        class,
        freq,
        time,
        amplitude: amp.sample(rng),
    }
}

fn rasterize(events: &[RfiEvent], nf: usize, nt: usize) -> RfiMask {
    let mut mask = RfiMask::empty(nf, nt);
    for ev in events {
        for f in ev.freq.0..ev.freq.1 {
            for t in ev.time.0..ev.time.1 {
                mask.set(f, t, true);
            }
        }
    }
    mask
}

fn stream_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws event layouts for every spectrogram, rescaling the class rates until
/// the dataset-level contamination is within tolerance of the target.
fn plan_events(cfg: &GeneratorConfig) -> Result<Vec<Vec<RfiEvent>>> {
    let n = cfg.n_train + cfg.n_test;
    let (nf, nt) = (cfg.freq_channels, cfg.time_steps);
    let amp = LogNormal::new(
        (cfg.rfi_amplitude_median * cfg.background_level).ln(),
        cfg.rfi_amplitude_sigma,
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 0));
    let mut rates = cfg.rfi_rates.clone();
    let mut last = 0.0;
    for _ in 0..=cfg.max_retries {
        let mut plans = Vec::with_capacity(n);
        for _ in 0..n {
            let mut events = Vec::new();
            for (class, rate) in rates.as_array() {
                if rate <= 0.0 {
                    continue;
                }
                let count = Poisson::new(rate)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(&mut rng) as usize;
                events.extend((0..count).map(|_| sample_event(class, nf, nt, &amp, &mut rng)));
            }
            plans.push(events);
        }
        if rates.is_zero() {
            return Ok(plans);
        }
        let flagged: usize = plans
            .iter()
            .map(|events| rasterize(events, nf, nt).count_flagged())
            .sum();
        last = flagged as f64 / (n * nf * nt) as f64;
        if (last - cfg.target_contamination).abs() <= cfg.contamination_tolerance {
            return Ok(plans);
        }
        let k = if last > 0.0 {
            (cfg.target_contamination / last).clamp(0.25, 4.0)
        } else {
            2.0
        };
        rates = rates.scaled(k);
    }
    Err(Error::Generation(format!(
        "contamination {last:.4} still outside {} +/- {} after {} retries",
        cfg.target_contamination, cfg.contamination_tolerance, cfg.max_retries
    )))
}

fn render(cfg: &GeneratorConfig, index: usize, events: &[RfiEvent]) -> Result<DatasetItem> {
    let (nf, nt) = (cfg.freq_channels, cfg.time_steps);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 1 + index as u64));
    let (lo, hi) = cfg.background_gradient_range;
    let mut slope = || {
        let g = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        if rng.random_bool(0.5) {
            g
        } else {
            -g
        }
    };
    let (gf, gt) = (slope(), slope());
    let mut rfi = vec![0.0f64; nf * nt];
    for ev in events {
        for f in ev.freq.0..ev.freq.1 {
            for t in ev.time.0..ev.time.1 {
                rfi[f * nt + t] += ev.amplitude * rng.random_range(0.75..1.25);
            }
        }
    }
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut values = Vec::with_capacity(nf * nt);
    for f in 0..nf {
        let ff = if nf > 1 { f as f64 / (nf - 1) as f64 } else { 0.5 };
        for t in 0..nt {
            let tt = if nt > 1 { t as f64 / (nt - 1) as f64 } else { 0.5 };
            let bg = cfg.background_level * (1.0 + gf * (ff - 0.5) + gt * (tt - 0.5));
            values.push((bg + rfi[f * nt + t] + noise.sample(&mut rng)).abs() as f32);
        }
    }
    let band = 90.0 / nf as f64;
    let meta = SpectrogramMeta {
        freq_start_mhz: 105.0,
        freq_end_mhz: 105.0 + band * nf as f64,
        integration_seconds: 3.52,
        baseline_id: index as i64,
    };
    DatasetItem::new(Spectrogram::new(nf, nt, values, meta)?, rasterize(events, nf, nt))
}

/// Generates a dataset and returns it together with the events injected into
/// each spectrogram (train items first, then test).
pub fn generate_with_events(cfg: &GeneratorConfig) -> Result<(Dataset, Vec<Vec<RfiEvent>>)> {
    cfg.validate()?;
    let plans = plan_events(cfg)?;
    let items = plans
        .iter()
        .enumerate()
        .map(|(i, events)| render(cfg, i, events))
        .collect::<Result<Vec<_>>>()?;
    let mut train = items;
    let test = train.split_off(cfg.n_train);
    Ok((
        Dataset {
            train,
            test,
            generator: Some(cfg.clone()),
        },
        plans,
    ))
}

/// Generates a dataset in memory. Deterministic for a fixed config.
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<Dataset> {
    generate_with_events(cfg).map(|(ds, _)| ds)
}

impl GeneratorConfig {
    /// Generates and writes the dataset under `dir`.
    pub fn generate_to(&self, dir: &std::path::Path) -> Result<(Dataset, DatasetManifest)> {
        let ds = generate_synthetic(self)?;
        let manifest = save_dataset(dir, &ds)?;
        Ok((ds, manifest))
    }
}
