//! Binary 8-bit grayscale PGM (P5) heatmaps.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Encodes values in `[0, 1]` as P5 bytes, one pixel per cell, value
/// `round(255 * v)`. Out-of-range values are clamped; NaN maps to 0.
pub fn encode_pgm(grid: &Array2<f64>) -> Vec<u8> {
    let (rows, cols) = grid.dim();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(grid.iter().map(|&v| {
        let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        (255.0 * v).round() as u8
    }));
    out
}

pub fn write_pgm(path: impl AsRef<Path>, grid: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(grid)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
