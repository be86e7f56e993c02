//! Spike rasters as binary portable graymaps (P5).
//!
//! One row per channel, one column per simulation slot (`steps * exposure`),
//! white where a spike occurs.

use std::path::Path;

use super::SpikeTrain;
use crate::error::{Error, Result};

pub fn to_pgm(train: &SpikeTrain) -> Vec<u8> {
    let (rows, cols) = (train.channels(), train.slots());
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.reserve(rows * cols);
    for c in 0..rows {
        for k in 0..cols {
            out.push(if train.slot(k)[c] == 1 { 255 } else { 0 });
        }
    }
    out
}

pub fn write_pgm(path: &Path, train: &SpikeTrain) -> Result<()> {
    std::fs::write(path, to_pgm(train)).map_err(|e| Error::io(path, e))
}
