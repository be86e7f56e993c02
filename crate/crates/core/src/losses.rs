//! Comparison functions between network output and encoded targets.
//!
//! Outputs are real-valued and slot-major (`[slot][channel]`, the layout of
//! [`SpikeTrain`]); they are exact spikes in normal training and smooth
//! activations in the relaxed gradient-check mode. Every function returns the
//! per-sample loss; callers average over the batch.
//!
//! An optional validity mask (`pixel_channels x steps`, row-major) removes
//! padded pixels. Output channel `c` belongs to pixel row `c % pixel_channels`.

use serde::{Deserialize, Serialize};

use crate::encoding::{CountTarget, EncodingMethod, SpikeTrain, Target};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Squared error over every spike slot.
    LatencyMse,
    /// Squared error between per-step spike counts and target counts.
    RateCountMse,
    Huber,
    /// Squared error between soft first-spike times (`sum_e e * y_e`) and
    /// target spike indices. Only meaningful for one-spike-per-window outputs.
    FirstSpikeTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    pub huber_delta: f64,
}

impl LossConfig {
    pub fn new(kind: LossKind) -> Self {
        Self { kind, huber_delta: 1.0 }
    }

    /// The loss paired with each encoding family.
    pub fn for_method(method: EncodingMethod) -> Self {
        Self::new(match method {
            EncodingMethod::Rate => LossKind::RateCountMse,
            EncodingMethod::Delta => LossKind::Huber,
            _ => LossKind::LatencyMse,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.huber_delta > 0.0) {
            return Err(Error::Config(format!(
                "huber_delta must be positive, got {}",
                self.huber_delta
            )));
        }
        Ok(())
    }

    /// Loss and its gradient with respect to every output element.
    pub fn loss_and_grad(&self, output: &[f64], target: &Target, valid: Option<&[bool]>) -> Result<(f64, Vec<f64>)> {
        self.validate()?;
        match (self.kind, target) {
            (LossKind::LatencyMse, Target::Spikes(f)) => latency_mse(output, f, valid),
            (LossKind::Huber, Target::Spikes(f)) => huber(output, f, self.huber_delta, valid),
            (LossKind::FirstSpikeTime, Target::Spikes(f)) => first_spike_time(output, f, valid),
            (LossKind::RateCountMse, Target::Counts(c)) => rate_count_mse(output, c, valid),
            (kind, _) => Err(Error::Config(format!("loss {kind:?} does not match the target type"))),
        }
    }

    pub fn loss(&self, output: &[f64], target: &Target, valid: Option<&[bool]>) -> Result<f64> {
        self.loss_and_grad(output, target, valid).map(|(l, _)| l)
    }
}

struct Mask<'a> {
    valid: Option<&'a [bool]>,
    pixel_channels: usize,
    steps: usize,
}

impl<'a> Mask<'a> {
    fn new(valid: Option<&'a [bool]>, channels: usize, steps: usize) -> Result<Self> {
        let pixel_channels = match valid {
            Some(v) if steps > 0 && v.len() % steps == 0 && v.len() / steps > 0 => {
                let pc = v.len() / steps;
                if !channels.is_multiple_of(pc) {
                    return Err(Error::Shape(format!(
                        "validity mask of {pc} rows does not divide {channels} channels"
                    )));
                }
                pc
            }
            Some(v) => {
                return Err(Error::Shape(format!(
                    "validity mask of {} entries for {steps} steps",
                    v.len()
                )))
            }
            None => channels.max(1),
        };
        Ok(Self {
            valid,
            pixel_channels,
            steps,
        })
    }

    fn keep(&self, channel: usize, step: usize) -> bool {
        self.valid
            .is_none_or(|v| v[(channel % self.pixel_channels) * self.steps + step])
    }
}

fn check_spikes(output: &[f64], target: &SpikeTrain) -> Result<()> {
    if output.len() != target.as_slice().len() {
        return Err(Error::Shape(format!(
            "output has {} elements, target {}",
            output.len(),
            target.as_slice().len()
        )));
    }
    Ok(())
}

/// `sum_{e, c} (y - f)^2`, averaged over original time steps.
pub fn latency_mse(output: &[f64], target: &SpikeTrain, valid: Option<&[bool]>) -> Result<(f64, Vec<f64>)> {
    check_spikes(output, target)?;
    let (ch, steps, e) = (target.channels(), target.steps(), target.exposure());
    let mask = Mask::new(valid, ch, steps)?;
    let norm = steps.max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; output.len()];
    for k in 0..steps * e {
        let t = k / e;
        let f = target.slot(k);
        for c in 0..ch {
            if !mask.keep(c, t) {
                continue;
            }
            let i = k * ch + c;
            let d = output[i] - f[c] as f64;
            loss += d * d;
            grad[i] = 2.0 * d / norm;
        }
    }
    Ok((loss / norm, grad))
}

/// Mean over `(channel, step)` of `(count - target)^2`, where `count` sums
/// the output over the exposure window.
pub fn rate_count_mse(output: &[f64], target: &CountTarget, valid: Option<&[bool]>) -> Result<(f64, Vec<f64>)> {
    let (ch, steps, e) = (target.channels, target.steps, target.exposure);
    if output.len() != ch * steps * e || target.counts.len() != ch * steps {
        return Err(Error::Shape(format!(
            "output has {} elements for a {ch}x{steps}x{e} count target",
            output.len()
        )));
    }
    let mask = Mask::new(valid, ch, steps)?;
    let kept = (0..ch)
        .flat_map(|c| (0..steps).map(move |t| (c, t)))
        .filter(|(c, t)| mask.keep(*c, *t))
        .count();
    if kept == 0 {
        return Ok((0.0, vec![0.0; output.len()]));
    }
    let norm = kept as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; output.len()];
    for c in 0..ch {
        for t in 0..steps {
            if !mask.keep(c, t) {
                continue;
            }
            let count: f64 = (0..e).map(|s| output[(t * e + s) * ch + c]).sum();
            let d = count - target.counts[c * steps + t];
            loss += d * d;
            for s in 0..e {
                grad[(t * e + s) * ch + c] = 2.0 * d / norm;
            }
        }
    }
    Ok((loss / norm, grad))
}

/// Element-wise Huber loss with threshold `delta`, summed.
pub fn huber(output: &[f64], target: &SpikeTrain, delta: f64, valid: Option<&[bool]>) -> Result<(f64, Vec<f64>)> {
    check_spikes(output, target)?;
    let (ch, steps, e) = (target.channels(), target.steps(), target.exposure());
    let mask = Mask::new(valid, ch, steps)?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; output.len()];
    for k in 0..steps * e {
        let t = k / e;
        let f = target.slot(k);
        for c in 0..ch {
            if !mask.keep(c, t) {
                continue;
            }
            let i = k * ch + c;
            let (l, g) = huber_element(output[i] - f[c] as f64, delta);
            loss += l;
            grad[i] = g;
        }
    }
    Ok((loss, grad))
}

/// Huber value and derivative for residual `r`.
pub fn huber_element(r: f64, delta: f64) -> (f64, f64) {
    if r.abs() <= delta {
        (0.5 * r * r, r)
    } else {
        (delta * (r.abs() - 0.5 * delta), delta * r.signum())
    }
}

/// Squared difference between soft spike times and target spike indices,
/// averaged over original time steps.
pub fn first_spike_time(output: &[f64], target: &SpikeTrain, valid: Option<&[bool]>) -> Result<(f64, Vec<f64>)> {
    check_spikes(output, target)?;
    let (ch, steps, e) = (target.channels(), target.steps(), target.exposure());
    let mask = Mask::new(valid, ch, steps)?;
    let norm = steps.max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; output.len()];
    for c in 0..ch {
        for t in 0..steps {
            if !mask.keep(c, t) {
                continue;
            }
            let wanted = target.window(c, t).position(|s| s).unwrap_or(e - 1) as f64;
            let time: f64 = (0..e).map(|s| s as f64 * output[(t * e + s) * ch + c]).sum();
            let d = time - wanted;
            loss += d * d;
            for s in 0..e {
                grad[(t * e + s) * ch + c] = 2.0 * d * s as f64 / norm;
            }
        }
    }
    Ok((loss / norm, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::rate;
    use proptest::prelude::*;

    fn real(train: &SpikeTrain) -> Vec<f64> {
        train.as_slice().iter().map(|v| *v as f64).collect()
    }

    fn random_train(bits: &[bool], c: usize, t: usize, e: usize) -> SpikeTrain {
        SpikeTrain::from_slots(c, t, e, bits.iter().map(|b| *b as u8).collect()).unwrap()
    }

    #[test]
    fn latency_zero_and_single_slot() {
        let mut f = SpikeTrain::zeros(3, 1, 4);
        f.set(0, 0, 3, true);
        let (l, g) = latency_mse(&real(&f), &f, None).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
        let mut y = f.clone();
        y.set(2, 0, 1, true);
        assert_eq!(latency_mse(&real(&y), &f, None).unwrap().0, 1.0);
    }

    #[test]
    fn rate_examples() {
        let e = 10;
        let target = rate::encode_target(&[true, false], 2, 1, e, 0.8, 0.2);
        let mut y = vec![0.0; 2 * e];
        for s in 0..8 {
            y[s * 2] = 1.0;
        }
        for s in 0..2 {
            y[s * 2 + 1] = 1.0;
        }
        assert_eq!(rate_count_mse(&y, &target, None).unwrap().0, 0.0);
        let background = rate::encode_target(&[false; 3], 3, 1, e, 0.8, 0.2);
        let silent = vec![0.0; 3 * e];
        assert!((rate_count_mse(&silent, &background, None).unwrap().0 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber_element(0.0, 1.0).0, 0.0);
        assert!((huber_element(0.5, 1.0).0 - 0.125).abs() < 1e-15);
        assert!((huber_element(-2.0, 1.0).0 - 1.5).abs() < 1e-15);
        let f = SpikeTrain::zeros(2, 1, 1);
        assert!((huber(&[0.5, 2.0], &f, 1.0, None).unwrap().0 - 1.625).abs() < 1e-15);
    }

    #[test]
    fn huber_is_c1_at_delta() {
        for delta in [0.3, 1.0, 2.5] {
            let eps = 1e-12;
            let (lo, glo) = huber_element(delta - eps, delta);
            let (hi, ghi) = huber_element(delta + eps, delta);
            assert!((lo - hi).abs() < 1e-9);
            assert!((glo - ghi).abs() < 1e-9);
            let (at, gat) = huber_element(delta, delta);
            assert!((at - delta * (delta - 0.5 * delta)).abs() < 1e-12);
            assert!((gat - delta).abs() < 1e-12);
        }
    }

    #[test]
    fn validity_mask_drops_padding() {
        let f = SpikeTrain::zeros(2, 2, 1);
        let y = vec![1.0, 1.0, 1.0, 1.0];
        // only pixel (0, 0) is real
        let valid = [true, false, false, false];
        assert_eq!(latency_mse(&y, &f, Some(&valid)).unwrap().0, 0.5);
        // delta-style doubled output: channel 2 maps back to pixel row 0
        let f4 = SpikeTrain::zeros(4, 2, 1);
        let y4 = vec![1.0; 8];
        assert_eq!(huber(&y4, &f4, 1.0, Some(&valid)).unwrap().0, 1.0);
    }

    #[test]
    fn mismatched_shapes_and_kinds() {
        let f = SpikeTrain::zeros(2, 2, 2);
        assert!(matches!(latency_mse(&[0.0; 3], &f, None), Err(Error::Shape(_))));
        let cfg = LossConfig::new(LossKind::RateCountMse);
        assert!(cfg.loss(&[0.0; 8], &Target::Spikes(f), None).is_err());
    }

    #[test]
    fn first_spike_time_matches_index_difference() {
        let mut f = SpikeTrain::zeros(1, 1, 5);
        f.set(0, 0, 4, true);
        let mut y = SpikeTrain::zeros(1, 1, 5);
        y.set(0, 0, 1, true);
        assert_eq!(first_spike_time(&real(&y), &f, None).unwrap().0, 9.0);
        assert_eq!(first_spike_time(&real(&f), &f, None).unwrap().0, 0.0);
    }

    proptest! {
        #[test]
        fn latency_equals_hamming(bits in prop::collection::vec(any::<bool>(), 2 * 3 * 4 * 2)) {
            let (a, b) = bits.split_at(24);
            let y = random_train(a, 2, 3, 4);
            let f = random_train(b, 2, 3, 4);
            let hamming = a.iter().zip(b).filter(|(x, y)| x != y).count() as f64;
            let (l, _) = latency_mse(&real(&y), &f, None).unwrap();
            prop_assert!((l * 3.0 - hamming).abs() < 1e-12);
        }

        #[test]
        fn losses_are_non_negative(y in prop::collection::vec(-2.0f64..2.0, 12), bits in prop::collection::vec(any::<bool>(), 12)) {
            let f = random_train(&bits, 3, 2, 2);
            prop_assert!(latency_mse(&y, &f, None).unwrap().0 >= 0.0);
            prop_assert!(huber(&y, &f, 0.7, None).unwrap().0 >= 0.0);
            let counts = rate::encode_target(&bits[..6], 3, 2, 2, 0.8, 0.2);
            prop_assert!(rate_count_mse(&y, &counts, None).unwrap().0 >= 0.0);
        }
    }
}
