//! Square tiling of spectrograms into fixed-size patches and the inverse.

use std::collections::HashMap;

use super::{RfiMask, Spectrogram};
use crate::error::{Error, Result};

pub const DEFAULT_PATCH_SIZE: usize = 32;

/// A `size x size` tile of a parent spectrogram and its mask.
///
/// Tiles hanging over the parent's edge are zero-padded; `valid` is false for
/// padded pixels, which are ignored by losses and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub size: usize,
    pub values: Vec<f32>,
    pub flags: Vec<bool>,
    pub valid: Vec<bool>,
    pub origin_freq: usize,
    pub origin_time: usize,
}

impl Patch {
    pub fn value(&self, freq: usize, time: usize) -> f32 {
        self.values[freq * self.size + time]
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Describes how a parent of a given shape is tiled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub freq_channels: usize,
    pub time_steps: usize,
    pub patch_size: usize,
}

impl PatchGrid {
    pub fn new(freq_channels: usize, time_steps: usize, patch_size: usize) -> Result<Self> {
        if patch_size == 0 {
            return Err(Error::Argument("patch size must be positive".into()));
        }
        Ok(Self {
            freq_channels,
            time_steps,
            patch_size,
        })
    }

    pub fn freq_tiles(&self) -> usize {
        self.freq_channels.div_ceil(self.patch_size)
    }

    pub fn time_tiles(&self) -> usize {
        self.time_steps.div_ceil(self.patch_size)
    }

    pub fn n_patches(&self) -> usize {
        self.freq_tiles() * self.time_tiles()
    }

    /// Tile origins in row-major order (frequency blocks outer, time blocks inner).
    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let p = self.patch_size;
        (0..self.freq_tiles()).flat_map(move |fi| (0..self.time_tiles()).map(move |ti| (fi * p, ti * p)))
    }
}

/// Splits a spectrogram and its mask into row-major `size x size` patches.
pub fn patch(spec: &Spectrogram, mask: &RfiMask, size: usize) -> Result<Vec<Patch>> {
    if spec.shape() != mask.shape() {
        return Err(Error::Shape(format!(
            "spectrogram {:?} vs mask {:?}",
            spec.shape(),
            mask.shape()
        )));
    }
    let grid = PatchGrid::new(spec.freq_channels(), spec.time_steps(), size)?;
    let (nf, nt) = spec.shape();
    Ok(grid
        .origins()
        .map(|(f0, t0)| {
            let mut values = vec![0.0; size * size];
            let mut flags = vec![false; size * size];
            let mut valid = vec![false; size * size];
            for df in 0..size.min(nf - f0) {
                for dt in 0..size.min(nt - t0) {
                    let i = df * size + dt;
                    values[i] = spec.get(f0 + df, t0 + dt);
                    flags[i] = mask.get(f0 + df, t0 + dt);
                    valid[i] = true;
                }
            }
            Patch {
                size,
                values,
                flags,
                valid,
                origin_freq: f0,
                origin_time: t0,
            }
        })
        .collect())
}

/// Reassembles per-patch values (each `patch_size^2`, row-major) into the
/// parent layout, dropping padding. Tiles may arrive in any order.
pub fn stitch_values<T: Copy + Default>(grid: &PatchGrid, tiles: &[((usize, usize), &[T])]) -> Result<Vec<T>> {
    let p = grid.patch_size;
    let expected: HashMap<(usize, usize), usize> = grid.origins().enumerate().map(|(i, o)| (o, i)).collect();
    let mut seen = vec![false; expected.len()];
    let mut out = vec![T::default(); grid.freq_channels * grid.time_steps];
    for (origin, data) in tiles {
        let idx = *expected
            .get(origin)
            .ok_or_else(|| Error::Consistency(format!("tile origin {origin:?} is not on the grid")))?;
        if seen[idx] {
            return Err(Error::Consistency(format!("tile origin {origin:?} appears twice")));
        }
        seen[idx] = true;
        if data.len() != p * p {
            return Err(Error::Shape(format!(
                "tile at {origin:?} has {} values, expected {}",
                data.len(),
                p * p
            )));
        }
        let (f0, t0) = *origin;
        for df in 0..p.min(grid.freq_channels - f0) {
            for dt in 0..p.min(grid.time_steps - t0) {
                out[(f0 + df) * grid.time_steps + t0 + dt] = data[df * p + dt];
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let origin = grid.origins().nth(missing).unwrap_or_default();
        return Err(Error::Consistency(format!("missing tile at {origin:?}")));
    }
    Ok(out)
}

/// Inverse of [`patch`] for predicted flags.
pub fn stitch(grid: &PatchGrid, tiles: &[((usize, usize), &[bool])]) -> Result<RfiMask> {
    let flags = stitch_values(grid, tiles)?;
    RfiMask::new(grid.freq_channels, grid.time_steps, flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SpectrogramMeta;
    use proptest::prelude::*;

    fn ramp(f: usize, t: usize) -> (Spectrogram, RfiMask) {
        let values = (0..f * t).map(|i| i as f32).collect();
        let flags = (0..f * t).map(|i| i % 7 == 0).collect();
        (
            Spectrogram::new(f, t, values, SpectrogramMeta::default()).unwrap(),
            RfiMask::new(f, t, flags).unwrap(),
        )
    }

    fn tiles_of(patches: &[Patch]) -> Vec<((usize, usize), &[bool])> {
        patches
            .iter()
            .map(|p| ((p.origin_freq, p.origin_time), p.flags.as_slice()))
            .collect()
    }

    #[test]
    fn tiles_64_by_32() {
        let (s, m) = ramp(64, 64);
        let patches = patch(&s, &m, 32).unwrap();
        let origins: Vec<_> = patches.iter().map(|p| (p.origin_freq, p.origin_time)).collect();
        assert_eq!(origins, vec![(0, 0), (0, 32), (32, 0), (32, 32)]);
        assert!(patches.iter().all(|p| p.n_valid() == 32 * 32));
        assert_eq!(patches[3].value(0, 0), s.get(32, 32));
    }

    #[test]
    fn full_size_spectrogram_gives_256_patches() {
        let (s, m) = ramp(512, 512);
        assert_eq!(patch(&s, &m, 32).unwrap().len(), 256);
    }

    #[test]
    fn pads_non_divisible_shapes() {
        let (s, m) = ramp(33, 33);
        let patches = patch(&s, &m, 32).unwrap();
        assert_eq!(patches.len(), 4);
        // the far corner tile holds a single real pixel
        assert_eq!(patches[3].n_valid(), 1);
        assert_eq!(patches[1].n_valid(), 32);
        assert_eq!(patches[1].values[1], 0.0);
        assert!(!patches[1].valid[1]);
    }

    #[test]
    fn zero_patch_size_is_rejected() {
        let (s, m) = ramp(4, 4);
        assert!(matches!(patch(&s, &m, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn single_tile_is_identity() {
        let (s, m) = ramp(32, 32);
        let patches = patch(&s, &m, 32).unwrap();
        let grid = PatchGrid::new(32, 32, 32).unwrap();
        assert_eq!(stitch(&grid, &tiles_of(&patches)).unwrap(), m);
    }

    #[test]
    fn stitch_detects_overlap_and_gaps() {
        let (s, m) = ramp(64, 64);
        let patches = patch(&s, &m, 32).unwrap();
        let grid = PatchGrid::new(64, 64, 32).unwrap();
        let mut tiles = tiles_of(&patches);
        tiles[1] = tiles[0];
        assert!(matches!(stitch(&grid, &tiles), Err(Error::Consistency(_))));
        tiles.truncate(3);
        tiles[1] = ((0, 32), patches[1].flags.as_slice());
        assert!(matches!(stitch(&grid, &tiles), Err(Error::Consistency(_))));
        let off_grid = vec![((5, 0), patches[0].flags.as_slice())];
        assert!(matches!(stitch(&grid, &off_grid), Err(Error::Consistency(_))));
    }

    proptest! {
        #[test]
        fn round_trip_any_shape(f in 1usize..80, t in 1usize..80, p in 1usize..40, seed in any::<u64>()) {
            let values: Vec<f32> = (0..f * t).map(|i| ((i as u64 ^ seed) % 97) as f32).collect();
            let flags: Vec<bool> = (0..f * t).map(|i| (i as u64).wrapping_mul(seed | 1).is_multiple_of(5)).collect();
            let s = Spectrogram::new(f, t, values.clone(), SpectrogramMeta::default()).unwrap();
            let m = RfiMask::new(f, t, flags).unwrap();
            let patches = patch(&s, &m, p).unwrap();
            let grid = PatchGrid::new(f, t, p).unwrap();
            let mut tiles = tiles_of(&patches);
            tiles.reverse();
            prop_assert_eq!(stitch(&grid, &tiles).unwrap(), m);
            let vtiles: Vec<_> = patches.iter().map(|p| ((p.origin_freq, p.origin_time), p.values.as_slice())).collect();
            prop_assert_eq!(stitch_values(&grid, &vtiles).unwrap(), values);
        }
    }
}
