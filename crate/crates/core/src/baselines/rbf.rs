use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellCoord, RadioMap, RegionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RbfKind {
    Multiquadric,
    InverseMultiquadric,
    Gaussian,
    ThinPlate,
}

impl RbfKind {
    fn eval(self, r: f64, shape: f64) -> f64 {
        match self {
            RbfKind::Multiquadric => (r * r + shape * shape).sqrt(),
            RbfKind::InverseMultiquadric => 1.0 / (r * r + shape * shape).sqrt(),
            RbfKind::Gaussian => (-(r / shape).powi(2)).exp(),
            RbfKind::ThinPlate => {
                if r == 0.0 {
                    0.0
                } else {
                    r * r * r.ln()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfConfig {
    pub kind: RbfKind,
    /// Kernel shape parameter; defaults to the mean nearest-center spacing.
    pub shape: Option<f64>,
    /// Upper bound on the number of centers.
    pub center_budget: usize,
    /// Observed cells within this Chebyshev distance of a missing cell are
    /// preferred as centers.
    pub halo: usize,
    /// Diagonal jitter added to the kernel matrix.
    pub ridge: f64,
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self {
            kind: RbfKind::Multiquadric,
            shape: None,
            center_budget: 600,
            halo: 3,
            ridge: 1e-8,
        }
    }
}

fn thin(cells: Vec<CellCoord>, keep: usize) -> Vec<CellCoord> {
    if cells.len() <= keep || keep == 0 {
        return if keep == 0 { Vec::new() } else { cells };
    }
    let step = cells.len().div_ceil(keep);
    cells.into_iter().step_by(step).collect()
}

/// Centers: a ring of observed cells around the missing area plus a
/// uniform-grid subsample of the rest, at most `center_budget` in total.
pub fn select_centers(state: &RegionState, cfg: &RbfConfig) -> Vec<CellCoord> {
    let (rows, cols) = state.shape();
    let h = cfg.halo as isize;
    // Summed-area table of missing cells.
    let mut sat = Array2::<u32>::zeros((rows + 1, cols + 1));
    for r in 0..rows {
        for c in 0..cols {
            sat[[r + 1, c + 1]] = state.is_missing(r, c) as u32 + sat[[r, c + 1]] + sat[[r + 1, c]] - sat[[r, c]];
        }
    }
    let near_missing = |r: usize, c: usize| {
        let r0 = (r as isize - h).max(0) as usize;
        let c0 = (c as isize - h).max(0) as usize;
        let r1 = (r + cfg.halo + 1).min(rows);
        let c1 = (c + cfg.halo + 1).min(cols);
        sat[[r1, c1]] + sat[[r0, c0]] - sat[[r0, c1]] - sat[[r1, c0]] > 0
    };

    let observed: Vec<CellCoord> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| CellCoord::new(r, c)))
        .filter(|c| state.was_observed(c.row, c.col))
        .collect();
    let (ring, rest): (Vec<_>, Vec<_>) = observed.into_iter().partition(|c| near_missing(c.row, c.col));

    let budget = cfg.center_budget.max(1);
    let ring = thin(ring, budget * 3 / 4);
    let left = budget - ring.len();
    let grid_target = left.max(1);
    let stride = ((rest.len() as f64 / grid_target as f64).sqrt().ceil() as usize).max(1);
    let grid: Vec<CellCoord> = rest
        .into_iter()
        .filter(|c| c.row % stride == 0 && c.col % stride == 0)
        .collect();
    let grid = thin(grid, left);
    let mut centers = ring;
    centers.extend(grid);
    if centers.is_empty() {
        // Tiny budgets: keep at least one observed cell.
        if let Some(c) = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| CellCoord::new(r, c)))
            .find(|c| state.was_observed(c.row, c.col))
        {
            centers.push(c);
        }
    }
    centers
}

fn dist(a: CellCoord, b: (f64, f64)) -> f64 {
    (a.row as f64 - b.0).hypot(a.col as f64 - b.1)
}

fn has_three_non_collinear(centers: &[CellCoord]) -> bool {
    let Some(&p0) = centers.first() else { return false };
    let Some(&p1) = centers.iter().find(|&&c| c != p0) else { return false };
    let (ax, ay) = (p1.col as f64 - p0.col as f64, p1.row as f64 - p0.row as f64);
    centers.iter().any(|c| {
        let (bx, by) = (c.col as f64 - p0.col as f64, c.row as f64 - p0.row as f64);
        ax * by - ay * bx != 0.0
    })
}

/// Radial-basis interpolation of the missing cells from observed centers,
/// with a linear polynomial tail when the centers allow one.
pub fn rbf_reconstruct(map: &RadioMap, state: &RegionState, cfg: &RbfConfig) -> Result<RadioMap> {
    if map.shape() != state.shape() {
        return Err(Error::ShapeMismatch {
            expected: map.shape(),
            actual: state.shape(),
        });
    }
    let centers = select_centers(state, cfg);
    if centers.is_empty() {
        return Err(Error::NoObservedCells);
    }
    let n = centers.len();
    let shape = cfg.shape.unwrap_or_else(|| {
        if n < 2 {
            return 1.0;
        }
        let total: f64 = centers
            .iter()
            .map(|&a| {
                centers
                    .iter()
                    .filter(|&&b| b != a)
                    .map(|&b| dist(a, (b.row as f64, b.col as f64)))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / n as f64
    });
    let poly = if has_three_non_collinear(&centers) { 3 } else { 1 };
    let size = n + poly;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut b = DVector::<f64>::zeros(size);
    for (i, &ci) in centers.iter().enumerate() {
        for (j, &cj) in centers.iter().enumerate() {
            a[(i, j)] = cfg.kind.eval(dist(ci, (cj.row as f64, cj.col as f64)), shape);
        }
        a[(i, i)] += cfg.ridge;
        let p = [1.0, ci.col as f64, ci.row as f64];
        for k in 0..poly {
            a[(i, n + k)] = p[k];
            a[(n + k, i)] = p[k];
        }
        b[i] = map.get(ci);
    }
    let sol = a.lu().solve(&b).ok_or(Error::Singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }

    let mut out = map.clone();
    for ((r, c), v) in out.values.indexed_iter_mut() {
        if !state.is_missing(r, c) {
            continue;
        }
        let mut s = sol[n];
        if poly == 3 {
            s += sol[n + 1] * c as f64 + sol[n + 2] * r as f64;
        }
        for (i, &ci) in centers.iter().enumerate() {
            s += sol[i] * cfg.kind.eval(dist(ci, (r as f64, c as f64)), shape);
        }
        *v = s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{init_region_state, Rect};

    #[test]
    fn constant_field_is_reproduced() {
        let map = RadioMap::from_normalized(Array2::from_elem((20, 20), 0.42)).unwrap();
        let state = init_region_state(&map, Rect::new(6, 6, 6, 6)).unwrap();
        let out = rbf_reconstruct(&map, &state, &RbfConfig::default()).unwrap();
        for cell in Rect::new(6, 6, 6, 6).cells() {
            assert!((out.get(cell) - 0.42).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_ramp_is_exact() {
        let ramp = Array2::from_shape_fn((20, 24), |(r, c)| 0.01 * r as f64 + 0.02 * c as f64 + 0.05);
        let map = RadioMap::from_normalized(ramp.clone()).unwrap();
        let rect = Rect::new(5, 7, 8, 9);
        let state = init_region_state(&map, rect).unwrap();
        let out = rbf_reconstruct(&map, &state, &RbfConfig::default()).unwrap();
        for cell in rect.cells() {
            assert!((out.get(cell) - ramp[[cell.row, cell.col]]).abs() < 1e-6);
        }
    }

    #[test]
    fn single_center_interpolates_its_value() {
        let mut vals = Array2::from_elem((5, 5), 0.0);
        vals[[0, 0]] = 0.8;
        let map = RadioMap::from_normalized(vals).unwrap();
        let mut mask = Array2::from_elem((5, 5), true);
        mask[[0, 0]] = false;
        let state = RegionState::from_mask(&mask).unwrap();
        let centers = select_centers(&state, &RbfConfig::default());
        assert_eq!(centers, vec![CellCoord::new(0, 0)]);
        let out = rbf_reconstruct(&map, &state, &RbfConfig::default()).unwrap();
        assert!((out.values[[0, 0]] - 0.8).abs() < 1e-9);
        // Radially symmetric: cells at equal distance agree.
        assert!((out.values[[0, 3]] - out.values[[3, 0]]).abs() < 1e-12);
    }

    #[test]
    fn observed_cells_are_untouched_and_budget_respected() {
        let vals = Array2::from_shape_fn((40, 40), |(r, c)| ((r * 7 + c * 3) % 11) as f64 / 11.0);
        let map = RadioMap::from_normalized(vals).unwrap();
        let state = init_region_state(&map, Rect::new(10, 12, 10, 10)).unwrap();
        let cfg = RbfConfig {
            center_budget: 100,
            ..RbfConfig::default()
        };
        assert!(select_centers(&state, &cfg).len() <= 100);
        let out = rbf_reconstruct(&map, &state, &cfg).unwrap();
        for ((r, c), v) in out.values.indexed_iter() {
            if !state.is_missing(r, c) {
                assert_eq!(v.to_bits(), map.values[[r, c]].to_bits());
            }
        }
    }
}
