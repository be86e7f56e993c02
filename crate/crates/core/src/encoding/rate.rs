//! Rate coding: pixel intensities are Bernoulli firing probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CountTarget, Decoded, SpikeTrain};

/// Spikes for one pixel over `exposure` slots, each with probability `x`.
pub fn encode_pixel<R: Rng>(x: f64, exposure: usize, rng: &mut R) -> Vec<bool> {
    (0..exposure).map(|_| rng.random::<f64>() < x).collect()
}

/// Encodes a patch with a generator seeded from `seed`.
pub fn encode(values: &[f32], channels: usize, steps: usize, exposure: usize, seed: u64) -> SpikeTrain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = SpikeTrain::zeros(channels, steps, exposure);
    for c in 0..channels {
        for t in 0..steps {
            let x = values[c * steps + t] as f64;
            for (e, s) in encode_pixel(x, exposure, &mut rng).into_iter().enumerate() {
                train.set(c, t, e, s);
            }
        }
    }
    train
}

/// Target spike count for one mask bit: `high * E` for RFI, `low * E` otherwise.
pub fn target_count(flag: bool, exposure: usize, high: f64, low: f64) -> f64 {
    if flag {
        high * exposure as f64
    } else {
        low * exposure as f64
    }
}

pub fn encode_target(
    flags: &[bool],
    channels: usize,
    steps: usize,
    exposure: usize,
    high: f64,
    low: f64,
) -> CountTarget {
    CountTarget {
        channels,
        steps,
        exposure,
        counts: flags.iter().map(|f| target_count(*f, exposure, high, low)).collect(),
    }
}

/// Flags a pixel when its firing rate `count / E` strictly exceeds `threshold`.
pub fn decode_count(count: f64, exposure: usize, threshold: f64) -> (bool, f64) {
    let rate = count / exposure as f64;
    (rate > threshold, rate)
}

pub fn decode(output: &SpikeTrain, threshold: f64) -> Decoded {
    let (channels, steps, e) = (output.channels(), output.steps(), output.exposure());
    let mut flags = Vec::with_capacity(channels * steps);
    let mut scores = Vec::with_capacity(channels * steps);
    for c in 0..channels {
        for t in 0..steps {
            let count = output.window(c, t).filter(|s| *s).count();
            let (flag, score) = decode_count(count as f64, e, threshold);
            flags.push(flag);
            scores.push(score);
        }
    }
    Decoded { flags, scores }
}
