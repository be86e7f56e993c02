//! Delta-modulation with polarity.
//!
//! Inputs spike on step-to-step changes that cross the threshold; positive
//! changes land in channels `0..F`, negative in `F..2F`. Targets encode mask
//! turn-on edges in the upper half and turn-off edges in the lower half, and
//! the decoder replays them through a per-channel latch. Exposure is always 1.

use super::{Decoded, SpikeTrain};

/// Polarity spikes for one channel's signal. `(positive, negative)` per step;
/// step 0 is compared against 0.
pub fn encode_channel(signal: &[f64], threshold: f64) -> Vec<(bool, bool)> {
    let mut prev = 0.0;
    signal
        .iter()
        .map(|x| {
            let d = x - prev;
            prev = *x;
            (d >= threshold, d <= -threshold)
        })
        .collect()
}

pub fn encode(values: &[f32], channels: usize, steps: usize, threshold: f64) -> SpikeTrain {
    let mut train = SpikeTrain::zeros(2 * channels, steps, 1);
    for c in 0..channels {
        let signal: Vec<f64> = values[c * steps..(c + 1) * steps].iter().map(|v| *v as f64).collect();
        for (t, (pos, neg)) in encode_channel(&signal, threshold).into_iter().enumerate() {
            train.set(c, t, 0, pos);
            train.set(c + channels, t, 0, neg);
        }
    }
    train
}

/// Edge targets for a `channels x steps` mask: `2 * channels` output channels.
pub fn encode_target(flags: &[bool], channels: usize, steps: usize) -> SpikeTrain {
    let mut train = SpikeTrain::zeros(2 * channels, steps, 1);
    for c in 0..channels {
        let mut prev = false;
        for t in 0..steps {
            let cur = flags[c * steps + t];
            if cur && !prev {
                train.set(c, t, 0, true);
            } else if !cur && prev {
                train.set(c + channels, t, 0, true);
            }
            prev = cur;
        }
    }
    train
}

/// Latch decoder. An upper-half spike sets the channel's flag, a lower-half
/// spike clears it; with both at once the set wins. The score is the latch state.
pub fn decode(output: &SpikeTrain, channels: usize) -> Decoded {
    let steps = output.steps();
    let mut flags = vec![false; channels * steps];
    for c in 0..channels {
        let mut latch = false;
        for t in 0..steps {
            if output.get(c + channels, t, 0) {
                latch = false;
            }
            if output.get(c, t, 0) {
                latch = true;
            }
            flags[c * steps + t] = latch;
        }
    }
    let scores = flags.iter().map(|f| *f as u8 as f64).collect();
    Decoded { flags, scores }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_signal_is_silent_after_start() {
        let spikes = encode_channel(&[0.4; 6], 0.1);
        assert_eq!(spikes[0], (true, false));
        assert!(spikes[1..].iter().all(|s| *s == (false, false)));
        assert!(encode_channel(&[0.05; 4], 0.1).iter().all(|s| *s == (false, false)));
    }

    #[test]
    fn jump_gives_one_positive_spike() {
        let spikes = encode_channel(&[0.0, 0.0, 0.5, 0.5], 0.1);
        assert_eq!(
            spikes,
            vec![(false, false), (false, false), (true, false), (false, false)]
        );
    }

    #[test]
    fn hand_traced_signal() {
        // d = [0, 0.05, 0.15]
        let spikes = encode_channel(&[0.0, 0.05, 0.2], 0.1);
        assert_eq!(spikes, vec![(false, false), (false, false), (true, false)]);
        let down = encode_channel(&[0.5, 0.3, 0.25], 0.1);
        assert_eq!(down, vec![(true, false), (false, true), (false, false)]);
    }

    #[test]
    fn run_edges() {
        let mut flags = vec![false; 8];
        flags[2..=4].iter_mut().for_each(|f| *f = true);
        let t = encode_target(&flags, 1, 8);
        assert!(t.get(0, 2, 0));
        assert!(t.get(1, 5, 0));
        assert_eq!(t.count(), 2);
        assert_eq!(encode_target(&[false; 8], 1, 8).count(), 0);
    }

    #[test]
    fn run_at_start_counts_as_turn_on() {
        let t = encode_target(&[true, true, false], 1, 3);
        assert!(t.get(0, 0, 0));
        assert!(t.get(1, 2, 0));
    }

    proptest! {
        #[test]
        fn target_round_trip(flags in prop::collection::vec(any::<bool>(), 32 * 32)) {
            let t = encode_target(&flags, 32, 32);
            prop_assert_eq!(decode(&t, 32).flags, flags);
        }
    }
}
