//! Error metrics over the restricted region.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellCoord, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    pub ne: f64,
    /// Number of evaluated cells.
    pub cells: usize,
    /// Bounding rectangle of the evaluated cells.
    pub region: Rect,
}

fn check_shapes(truth: &Array2<f64>, estimate: &Array2<f64>) -> Result<()> {
    if truth.dim() != estimate.dim() {
        return Err(Error::ShapeMismatch {
            expected: truth.dim(),
            actual: estimate.dim(),
        });
    }
    Ok(())
}

/// `(sum of squared errors, sum of squared truth, count)` over `cells`.
fn sums(truth: &Array2<f64>, estimate: &Array2<f64>, cells: impl Iterator<Item = CellCoord>) -> (f64, f64, usize) {
    let mut err = 0.0;
    let mut energy = 0.0;
    let mut m = 0;
    for c in cells {
        let x = truth[[c.row, c.col]];
        let d = x - estimate[[c.row, c.col]];
        err += d * d;
        energy += x * x;
        m += 1;
    }
    (err, energy, m)
}

fn checked_region(truth: &Array2<f64>, estimate: &Array2<f64>, region: &Rect) -> Result<()> {
    check_shapes(truth, estimate)?;
    let (rows, cols) = truth.dim();
    region.check(rows, cols)?;
    if region.area() == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(())
}

/// Mean squared error over the region.
pub fn mse(truth: &Array2<f64>, estimate: &Array2<f64>, region: &Rect) -> Result<f64> {
    checked_region(truth, estimate, region)?;
    let (err, _, m) = sums(truth, estimate, region.cells());
    Ok(err / m as f64)
}

/// Squared error normalized by the energy of the truth over the region.
pub fn ne(truth: &Array2<f64>, estimate: &Array2<f64>, region: &Rect) -> Result<f64> {
    checked_region(truth, estimate, region)?;
    let (err, energy, _) = sums(truth, estimate, region.cells());
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok(err / energy)
}

pub fn evaluate(truth: &Array2<f64>, estimate: &Array2<f64>, region: &Rect) -> Result<MetricReport> {
    Ok(MetricReport {
        mse: mse(truth, estimate, region)?,
        ne: ne(truth, estimate, region)?,
        cells: region.area(),
        region: *region,
    })
}

/// Same metrics over the `true` cells of a mask.
pub fn evaluate_mask(truth: &Array2<f64>, estimate: &Array2<f64>, mask: &Array2<bool>) -> Result<MetricReport> {
    check_shapes(truth, estimate)?;
    if mask.dim() != truth.dim() {
        return Err(Error::ShapeMismatch {
            expected: truth.dim(),
            actual: mask.dim(),
        });
    }
    let cells: Vec<CellCoord> = mask
        .indexed_iter()
        .filter(|(_, &m)| m)
        .map(|((r, c), _)| CellCoord::new(r, c))
        .collect();
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (err, energy, m) = sums(truth, estimate, cells.iter().copied());
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let top = cells.iter().map(|c| c.row).min().unwrap_or(0);
    let bottom = cells.iter().map(|c| c.row).max().unwrap_or(0);
    let left = cells.iter().map(|c| c.col).min().unwrap_or(0);
    let right = cells.iter().map(|c| c.col).max().unwrap_or(0);
    Ok(MetricReport {
        mse: err / m as f64,
        ne: err / energy,
        cells: m,
        region: Rect::new(top, left, bottom - top + 1, right - left + 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_maps_score_zero() {
        let t = Array2::from_elem((4, 4), 0.5);
        let r = Rect::new(1, 1, 2, 2);
        assert_eq!(mse(&t, &t, &r).unwrap(), 0.0);
        assert_eq!(ne(&t, &t, &r).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset() {
        let t = Array2::zeros((5, 5));
        let e = Array2::from_elem((5, 5), 0.1);
        assert!((mse(&t, &e, &Rect::new(0, 1, 3, 4)).unwrap() - 0.01).abs() < 1e-15);
        assert!(matches!(ne(&t, &e, &Rect::new(0, 1, 3, 4)), Err(Error::ZeroEnergy)));
    }

    #[test]
    fn zero_estimate_gives_unit_ne() {
        let t = Array2::from_shape_fn((4, 4), |(r, c)| (r + c) as f64 + 1.0);
        let e = Array2::zeros((4, 4));
        assert!((ne(&t, &e, &Rect::new(0, 0, 4, 4)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_region_is_rejected() {
        let t = Array2::zeros((3, 3));
        assert!(matches!(mse(&t, &t, &Rect::new(1, 1, 0, 2)), Err(Error::EmptyRegion)));
    }

    #[test]
    fn random_pairs_match_direct_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let t = Array2::from_shape_fn((15, 15), |_| rng.gen::<f64>());
            let e = Array2::from_shape_fn((15, 15), |_| rng.gen::<f64>());
            let (h, w) = (rng.gen_range(1..10), rng.gen_range(1..10));
            let r = Rect::new(rng.gen_range(0..=15 - h), rng.gen_range(0..=15 - w), h, w);
            let mut err = 0.0;
            let mut en = 0.0;
            for row in r.top..r.top + h {
                for col in r.left..r.left + w {
                    err += (t[[row, col]] - e[[row, col]]).powi(2);
                    en += t[[row, col]].powi(2);
                }
            }
            let rep = evaluate(&t, &e, &r).unwrap();
            assert!((rep.mse - err / (h * w) as f64).abs() <= 1e-12);
            assert!((rep.ne * en - rep.mse * rep.cells as f64).abs() <= 1e-9 * (rep.mse * rep.cells as f64));
        }
    }

    #[test]
    fn mask_and_rect_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = Array2::from_shape_fn((8, 8), |_| rng.gen::<f64>());
        let e = Array2::from_shape_fn((8, 8), |_| rng.gen::<f64>());
        let r = Rect::new(2, 3, 4, 3);
        let mask = Array2::from_shape_fn((8, 8), |(a, b)| r.contains(a, b));
        assert_eq!(evaluate(&t, &e, &r).unwrap(), evaluate_mask(&t, &e, &mask).unwrap());
    }
}
