use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellCoord, RadioMap, RegionState, Transmitter};

/// Floor applied to watt values before taking logarithms.
const POWER_FLOOR: f64 = 1e-12;

/// `power_dB = intercept_db - 10 * gamma * log10(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdplFit {
    pub intercept_db: f64,
    pub gamma: f64,
}

impl LdplFit {
    pub fn predict_watts(&self, distance: f64) -> f64 {
        let db = self.intercept_db - 10.0 * self.gamma * distance.log10();
        10f64.powf(db / 10.0)
    }
}

/// Least-squares log-distance fit over the originally observed cells.
/// Cells at zero distance from the transmitter are skipped.
pub fn fit_ldpl(map: &RadioMap, state: &RegionState, tx: &Transmitter) -> Result<LdplFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for ((r, c), &v) in map.values.indexed_iter() {
        if !state.was_observed(r, c) {
            continue;
        }
        let d = tx.distance_to(CellCoord::new(r, c));
        if d <= 0.0 {
            continue;
        }
        xs.push(10.0 * d.log10());
        ys.push(10.0 * map.to_raw(v).max(POWER_FLOOR).log10());
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateDistances);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 1e-12 * n * mx.abs().max(1.0).powi(2) {
        return Err(Error::DegenerateDistances);
    }
    let slope = sxy / sxx;
    Ok(LdplFit {
        intercept_db: my - slope * mx,
        gamma: -slope,
    })
}

/// Fills the missing cells from a global log-distance path-loss fit.
pub fn mbi_reconstruct(map: &RadioMap, state: &RegionState, tx: &Transmitter) -> Result<(RadioMap, LdplFit)> {
    if map.shape() != state.shape() {
        return Err(Error::ShapeMismatch {
            expected: map.shape(),
            actual: state.shape(),
        });
    }
    let fit = fit_ldpl(map, state, tx)?;
    let mut out = map.clone();
    for ((r, c), v) in out.values.indexed_iter_mut() {
        if state.is_missing(r, c) {
            let d = tx.distance_to(CellCoord::new(r, c)).max(0.5);
            *v = map.to_normalized(fit.predict_watts(d));
        }
    }
    Ok((out, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{init_region_state, normalize, Rect};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ldpl_raw(rows: usize, cols: usize, tx: &Transmitter, gamma: f64) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |(r, c)| 2.0 * tx.distance_to(CellCoord::new(r, c)).powf(-gamma))
    }

    #[test]
    fn recovers_planted_exponent() {
        let tx = Transmitter::new(-10.0, 7.0);
        let raw = ldpl_raw(30, 30, &tx, 2.0);
        let map = normalize(&raw).unwrap();
        let rect = Rect::new(10, 10, 8, 8);
        let state = init_region_state(&map, rect).unwrap();
        let (out, fit) = mbi_reconstruct(&map, &state, &tx).unwrap();
        assert!((fit.gamma - 2.0).abs() < 1e-6, "{}", fit.gamma);
        for cell in rect.cells() {
            assert!((out.get(cell) - map.get(cell)).abs() < 1e-6);
        }
    }

    #[test]
    fn two_points_define_the_line() {
        let tx = Transmitter::new(0.0, 0.0);
        let mut raw = Array2::from_elem((1, 5), 1.0);
        raw[[0, 1]] = 1.0; // d = 1
        raw[[0, 4]] = 1.0 / 64.0; // d = 4 -> gamma = 3
        let map = normalize(&raw).unwrap();
        let mut mask = Array2::from_elem((1, 5), true);
        mask[[0, 1]] = false;
        mask[[0, 4]] = false;
        let state = RegionState::from_mask(&mask).unwrap();
        let (out, fit) = mbi_reconstruct(&map, &state, &tx).unwrap();
        assert!((fit.gamma - 3.0).abs() < 1e-9);
        assert!((map.to_raw(out.values[[0, 2]]) - 1.0 / 8.0).abs() < 1e-9);
    }

    #[test]
    fn constant_field_gives_flat_line() {
        let tx = Transmitter::new(-3.0, -3.0);
        let map = normalize(&Array2::from_elem((10, 10), 4.0)).unwrap();
        let state = init_region_state(&map, Rect::new(3, 3, 3, 3)).unwrap();
        let (out, fit) = mbi_reconstruct(&map, &state, &tx).unwrap();
        assert!(fit.gamma.abs() < 1e-9);
        for cell in Rect::new(3, 3, 3, 3).cells() {
            assert!((map.to_raw(out.get(cell)) - 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn equal_distances_are_rejected() {
        let tx = Transmitter::new(1.0, 1.0);
        let map = normalize(&Array2::from_shape_fn((3, 3), |(r, c)| (r + c) as f64 + 1.0)).unwrap();
        let mut mask = Array2::from_elem((3, 3), true);
        for (r, c) in [(0, 1), (1, 0), (2, 1), (1, 2)] {
            mask[[r, c]] = false;
        }
        let state = RegionState::from_mask(&mask).unwrap();
        assert!(matches!(
            mbi_reconstruct(&map, &state, &tx),
            Err(Error::DegenerateDistances)
        ));
    }

    #[test]
    fn error_shrinks_with_noise() {
        let tx = Transmitter::new(-15.0, 12.0);
        let clean = ldpl_raw(30, 30, &tx, 2.5);
        let rect = Rect::new(8, 8, 10, 10);
        let mut errs = Vec::new();
        for noise in [0.3, 0.1, 0.01] {
            let mut rng = ChaCha8Rng::seed_from_u64(21);
            let noisy = clean.mapv(|v| v * (1.0 + noise * rng.gen_range(-1.0..1.0)));
            let map = normalize(&noisy).unwrap();
            let state = init_region_state(&map, rect).unwrap();
            let (out, _) = mbi_reconstruct(&map, &state, &tx).unwrap();
            let err: f64 = rect
                .cells()
                .map(|c| (map.to_raw(out.get(c)) - clean[[c.row, c.col]]).powi(2))
                .sum();
            errs.push(err);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}
