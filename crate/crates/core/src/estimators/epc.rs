use ndarray::Array2;
use rayon::prelude::*;

use super::SearchSource;
use crate::error::{Error, Result};
use crate::fill::{Patch, PatchEstimator, Validity};
use crate::grid::{CellCoord, RadioMap, RegionState};

/// Best exemplar window for a target patch.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarMatch {
    /// Top-left corner of the window.
    pub top: usize,
    pub left: usize,
    /// Sum of squared differences over the target's valid cells.
    pub cost: f64,
    pub patch: Patch,
}

/// Summed-area table of cells that are NOT usable as exemplar source.
fn excluded_prefix(state: &RegionState, source: SearchSource) -> Array2<u32> {
    let (rows, cols) = state.shape();
    let mut sat = Array2::<u32>::zeros((rows + 1, cols + 1));
    for r in 0..rows {
        for c in 0..cols {
            let bad = match source {
                SearchSource::OriginalObservedOnly => !state.was_observed(r, c),
                SearchSource::IncludeFilled => state.is_missing(r, c),
            } as u32;
            sat[[r + 1, c + 1]] = bad + sat[[r, c + 1]] + sat[[r + 1, c]] - sat[[r, c]];
        }
    }
    sat
}

/// Scans every `n x n` window made entirely of source cells and returns the
/// one with the smallest squared difference to the target over the target's
/// valid cells. Ties go to the smallest `(top, left)`.
pub fn epc_search(
    target: &Patch,
    map: &RadioMap,
    state: &RegionState,
    source: SearchSource,
) -> Result<ExemplarMatch> {
    let n = target.size;
    let (rows, cols) = map.shape();
    if target.valid_count() == 0 {
        return Err(Error::NoValidCells(target.center));
    }
    if n > rows || n > cols {
        return Err(Error::NoCandidateWindow { patch_size: n });
    }
    let known: Vec<(usize, usize, f64)> = target
        .validity
        .indexed_iter()
        .filter(|(_, &v)| v == Validity::Valid)
        .map(|((i, j), _)| (i, j, target.values[[i, j]]))
        .collect();
    let sat = excluded_prefix(state, source);
    let values = &map.values;

    let best = (0..=rows - n)
        .into_par_iter()
        .filter_map(|top| {
            let mut row_best: Option<(f64, usize, usize)> = None;
            for left in 0..=cols - n {
                let excluded = sat[[top + n, left + n]] + sat[[top, left]] - sat[[top, left + n]] - sat[[top + n, left]];
                if excluded != 0 {
                    continue;
                }
                let mut cost = 0.0;
                for &(i, j, v) in &known {
                    let d = values[[top + i, left + j]] - v;
                    cost += d * d;
                }
                if row_best.map_or(true, |(b, _, _)| cost < b) {
                    row_best = Some((cost, top, left));
                }
            }
            row_best
        })
        .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) { b } else { a });

    let (cost, top, left) = best.ok_or(Error::NoCandidateWindow { patch_size: n })?;
    let half = n / 2;
    let patch = Patch {
        center: CellCoord::new(top + half, left + half),
        size: n,
        values: values.slice(ndarray::s![top..top + n, left..left + n]).to_owned(),
        validity: Array2::from_elem((n, n), Validity::Valid),
    };
    Ok(ExemplarMatch { top, left, cost, patch })
}

/// Keeps the target's valid cells and takes hole cells from the exemplar.
pub fn epc_fill(target: &Patch, exemplar: &Patch) -> Patch {
    let mut out = target.clone();
    for ((i, j), &v) in target.validity.indexed_iter() {
        if v == Validity::Hole {
            out.values[[i, j]] = exemplar.values[[i, j]];
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExemplarCopy {
    pub source: SearchSource,
}

impl ExemplarCopy {
    pub fn new(source: SearchSource) -> Self {
        Self { source }
    }
}

impl PatchEstimator for ExemplarCopy {
    fn estimate(&self, target: &Patch, map: &RadioMap, state: &RegionState) -> Result<(Patch, f64)> {
        let m = epc_search(target, map, state, self.source)?;
        Ok((epc_fill(target, &m.patch), m.cost))
    }

    fn name(&self) -> &'static str {
        "epc"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fill::extract_patch;
    use crate::grid::{init_region_state, Rect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fully_observed_target_matches_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let map = RadioMap::from_normalized(Array2::from_shape_fn((12, 12), |_| rng.gen())).unwrap();
        let state = init_region_state(&map, Rect::new(0, 0, 2, 2)).unwrap();
        let target = extract_patch(&map, &state, CellCoord::new(7, 7), 3);
        let m = epc_search(&target, &map, &state, SearchSource::OriginalObservedOnly).unwrap();
        assert_eq!(m.cost, 0.0);
        assert_eq!((m.top, m.left), (6, 6));
    }

    #[test]
    fn constant_field_picks_top_left_most_window() {
        let map = RadioMap::from_normalized(Array2::from_elem((10, 10), 0.7)).unwrap();
        let state = init_region_state(&map, Rect::new(4, 4, 3, 3)).unwrap();
        let target = extract_patch(&map, &state, CellCoord::new(4, 4), 3);
        let m = epc_search(&target, &map, &state, SearchSource::OriginalObservedOnly).unwrap();
        assert_eq!(m.cost, 0.0);
        assert_eq!((m.top, m.left), (0, 0));
    }

    #[test]
    fn windows_touching_the_hole_are_excluded() {
        let map = RadioMap::from_normalized(Array2::from_elem((5, 5), 0.1)).unwrap();
        let state = init_region_state(&map, Rect::new(1, 1, 3, 3)).unwrap();
        let target = extract_patch(&map, &state, CellCoord::new(1, 1), 3);
        let err = epc_search(&target, &map, &state, SearchSource::OriginalObservedOnly).unwrap_err();
        assert!(matches!(err, Error::NoCandidateWindow { patch_size: 3 }));
    }

    #[test]
    fn fill_assembles_cellwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let map = RadioMap::from_normalized(Array2::from_shape_fn((9, 9), |_| rng.gen())).unwrap();
        let mut mask = Array2::from_elem((9, 9), false);
        for (r, c) in [(3, 3), (4, 5), (5, 4)] {
            mask[[r, c]] = true;
        }
        let state = crate::grid::RegionState::from_mask(&mask).unwrap();
        let target = extract_patch(&map, &state, CellCoord::new(4, 4), 3);
        let exemplar = extract_patch(&map, &state, CellCoord::new(1, 1), 3);
        let out = epc_fill(&target, &exemplar);
        let mut holes = 0;
        for ((i, j), v) in target.validity.indexed_iter() {
            match v {
                Validity::Hole => {
                    holes += 1;
                    assert_eq!(out.values[[i, j]], exemplar.values[[i, j]]);
                }
                _ => assert_eq!(out.values[[i, j]], target.values[[i, j]]),
            }
        }
        assert_eq!(holes, 3);

        let none = extract_patch(&map, &state, CellCoord::new(7, 7), 3);
        assert_eq!(epc_fill(&none, &exemplar), none);
    }

    #[test]
    fn all_hole_target_copies_exemplar() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let map = RadioMap::from_normalized(Array2::from_shape_fn((9, 9), |_| rng.gen())).unwrap();
        let state = init_region_state(&map, Rect::new(3, 3, 3, 3)).unwrap();
        let target = extract_patch(&map, &state, CellCoord::new(4, 4), 3);
        let exemplar = extract_patch(&map, &state, CellCoord::new(1, 1), 3);
        assert_eq!(epc_fill(&target, &exemplar).values, exemplar.values);
    }
}
