//! Latency (time-to-first-spike) coding.
//!
//! Bright pixels spike early in their exposure window, dim pixels late. Mask
//! targets put RFI at slot 0 and background in the final slot `E - 1`; a first
//! spike anywhere before the final slot decodes as RFI.

use super::{Decoded, SpikeTrain};
use crate::error::{Error, Result};

fn check_exposure(exposure: usize) -> Result<()> {
    if exposure < 2 {
        return Err(Error::Config(format!(
            "latency coding needs exposure >= 2, got {exposure}"
        )));
    }
    Ok(())
}

/// Slot index for intensity `x`: `round((1 - x) * (E - 1))`.
pub fn spike_slot(x: f64, exposure: usize) -> Result<usize> {
    check_exposure(exposure)?;
    let x = x.clamp(0.0, 1.0);
    Ok(((1.0 - x) * (exposure - 1) as f64).round() as usize)
}

/// Target slot for one mask bit.
pub fn target_slot(flag: bool, exposure: usize) -> usize {
    if flag {
        0
    } else {
        exposure - 1
    }
}

/// Decodes one exposure window: `(flag, score)` where the score is the
/// normalized earliness of the first spike, 0 when silent.
pub fn decode_window(window: impl IntoIterator<Item = bool>, exposure: usize) -> (bool, f64) {
    match window.into_iter().position(|s| s) {
        Some(first) if exposure > 1 => (
            first + 1 < exposure,
            (exposure - 1 - first) as f64 / (exposure - 1) as f64,
        ),
        _ => (false, 0.0),
    }
}

pub fn encode(values: &[f32], channels: usize, steps: usize, exposure: usize) -> Result<SpikeTrain> {
    check_exposure(exposure)?;
    let mut train = SpikeTrain::zeros(channels, steps, exposure);
    for c in 0..channels {
        for t in 0..steps {
            let slot = spike_slot(values[c * steps + t] as f64, exposure)?;
            train.set(c, t, slot, true);
        }
    }
    Ok(train)
}

pub fn encode_target(flags: &[bool], channels: usize, steps: usize, exposure: usize) -> Result<SpikeTrain> {
    check_exposure(exposure)?;
    let mut train = SpikeTrain::zeros(channels, steps, exposure);
    for c in 0..channels {
        for t in 0..steps {
            train.set(c, t, target_slot(flags[c * steps + t], exposure), true);
        }
    }
    Ok(train)
}

pub fn decode(output: &SpikeTrain) -> Decoded {
    let (channels, steps, e) = (output.channels(), output.steps(), output.exposure());
    let mut flags = Vec::with_capacity(channels * steps);
    let mut scores = Vec::with_capacity(channels * steps);
    for c in 0..channels {
        for t in 0..steps {
            let (flag, score) = decode_window(output.window(c, t), e);
            flags.push(flag);
            scores.push(score);
        }
    }
    Decoded { flags, scores }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slot_examples() {
        assert_eq!(spike_slot(1.0, 4).unwrap(), 0);
        assert_eq!(spike_slot(0.0, 4).unwrap(), 3);
        assert_eq!(spike_slot(0.5, 5).unwrap(), 2);
        assert!(matches!(spike_slot(0.5, 1), Err(Error::Config(_))));
    }

    #[test]
    fn target_examples() {
        assert_eq!(target_slot(true, 6), 0);
        assert_eq!(target_slot(false, 6), 5);
        let t = encode_target(&[false; 8], 8, 1, 6).unwrap();
        assert!((0..8).all(|c| t.get(c, 0, 5)));
        assert_eq!(t.count(), 8);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_window([true, false, false, false], 4), (true, 1.0));
        assert_eq!(decode_window([false; 4], 4), (false, 0.0));
        assert_eq!(decode_window([false, false, false, true], 4), (false, 0.0));
        let (flag, score) = decode_window([false, true, true, false], 4);
        assert!(flag);
        assert!((score - 2.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn one_spike_per_window(values in prop::collection::vec(0.0f32..=1.0, 24), e in 2usize..12) {
            let train = encode(&values, 4, 6, e).unwrap();
            for c in 0..4 {
                for t in 0..6 {
                    prop_assert_eq!(train.window(c, t).filter(|s| *s).count(), 1);
                }
            }
        }

        #[test]
        fn target_round_trip(flags in prop::collection::vec(any::<bool>(), 30), e in 2usize..10) {
            let target = encode_target(&flags, 5, 6, e).unwrap();
            prop_assert_eq!(decode(&target).flags, flags);
        }
    }
}
