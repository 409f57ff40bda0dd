//! The patch-by-patch fill loop.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellCoord, CellStatus, ObstacleMap, RadioMap, RegionState, Transmitter};
use crate::priority::{extract_boundary, priorities, select_patch, PriorityConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Validity {
    /// Observed or filled.
    Valid,
    /// Missing.
    Hole,
    OutOfGrid,
}

/// An `n x n` window centered on `center`. `values` is 0 wherever the cell
/// is not `Valid` unless an estimator has written a value there.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center: CellCoord,
    pub size: usize,
    pub values: Array2<f64>,
    pub validity: Array2<Validity>,
}

impl Patch {
    /// Grid coordinate of the top-left patch cell (may be negative).
    pub fn origin(&self) -> (isize, isize) {
        let half = (self.size / 2) as isize;
        (self.center.row as isize - half, self.center.col as isize - half)
    }

    pub fn hole_count(&self) -> usize {
        self.validity.iter().filter(|&&v| v == Validity::Hole).count()
    }

    pub fn valid_count(&self) -> usize {
        self.validity.iter().filter(|&&v| v == Validity::Valid).count()
    }

    /// Column-major flattening, matching the dictionary atom layout.
    pub fn to_column_vector(&self) -> Vec<f64> {
        self.values.t().iter().copied().collect()
    }

    pub fn validity_column_vector(&self) -> Vec<Validity> {
        self.validity.t().iter().copied().collect()
    }
}

pub fn extract_patch(map: &RadioMap, state: &RegionState, center: CellCoord, n: usize) -> Patch {
    let (rows, cols) = map.shape();
    let half = (n / 2) as isize;
    let mut values = Array2::zeros((n, n));
    let mut validity = Array2::from_elem((n, n), Validity::OutOfGrid);
    for i in 0..n {
        for j in 0..n {
            let r = center.row as isize - half + i as isize;
            let c = center.col as isize - half + j as isize;
            if r < 0 || c < 0 || r as usize >= rows || c as usize >= cols {
                continue;
            }
            let (r, c) = (r as usize, c as usize);
            if state.is_missing(r, c) {
                validity[[i, j]] = Validity::Hole;
            } else {
                validity[[i, j]] = Validity::Valid;
                values[[i, j]] = map.values[[r, c]];
            }
        }
    }
    Patch {
        center,
        size: n,
        values,
        validity,
    }
}

/// Writes the estimate into the hole cells of the patch that are still
/// missing and marks them filled with `confidence`. Known cells are never
/// touched. Returns the number of cells filled.
pub fn commit_patch(
    map: &mut RadioMap,
    state: &mut RegionState,
    estimate: &Patch,
    confidence: f64,
) -> Result<usize> {
    let (oi, oj) = estimate.origin();
    let mut writes = Vec::new();
    for ((i, j), &v) in estimate.validity.indexed_iter() {
        if v != Validity::Hole {
            continue;
        }
        let r = (oi + i as isize) as usize;
        let c = (oj + j as isize) as usize;
        if !state.is_missing(r, c) {
            continue;
        }
        let value = estimate.values[[i, j]];
        if !value.is_finite() {
            return Err(Error::NonFiniteEstimate { row: r, col: c });
        }
        writes.push((CellCoord::new(r, c), value));
    }
    for &(cell, value) in &writes {
        map.values[[cell.row, cell.col]] = value;
        state.mark_filled(cell, confidence);
    }
    Ok(writes.len())
}

/// Fills the hole cells of a target patch.
pub trait PatchEstimator: Sync {
    /// Returns the completed patch (valid cells untouched) and a scalar
    /// diagnostic (matching cost, sparse-coding objective, ...).
    fn estimate(&self, target: &Patch, map: &RadioMap, state: &RegionState) -> Result<(Patch, f64)>;

    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillStep {
    pub iteration: usize,
    pub center: CellCoord,
    pub priority: f64,
    pub confidence: f64,
    pub cells_filled: usize,
    pub missing_after: usize,
    pub diagnostic: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FillReport {
    pub iterations: usize,
    pub fill_order: Vec<FillStep>,
    pub cells_filled: usize,
}

impl FillReport {
    /// `iteration,center_row,center_col,priority` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,center_row,center_col,priority\n");
        for s in &self.fill_order {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.iteration, s.center.row, s.center.col, s.priority
            ));
        }
        out
    }
}

/// Fills every missing cell of `state`, most urgent boundary patch first.
///
/// `state` is updated in place; the returned map carries the estimates.
pub fn reconstruct(
    map: &RadioMap,
    state: &mut RegionState,
    obstacles: &ObstacleMap,
    txs: &[Transmitter],
    cfg: &PriorityConfig,
    estimator: &dyn PatchEstimator,
) -> Result<(RadioMap, FillReport)> {
    cfg.validate()?;
    let shape = map.shape();
    if state.shape() != shape {
        return Err(Error::ShapeMismatch {
            expected: shape,
            actual: state.shape(),
        });
    }
    if obstacles.shape() != shape {
        return Err(Error::ShapeMismatch {
            expected: shape,
            actual: obstacles.shape(),
        });
    }
    let mut out = map.clone();
    // Whatever sits under the mask is not ours to read.
    for ((r, c), v) in out.values.indexed_iter_mut() {
        if state.is_missing(r, c) {
            *v = 0.0;
        }
    }
    let mut report = FillReport::default();
    let mut missing = state.missing_count();
    if missing == 0 {
        return Ok((out, report));
    }
    if state.count(CellStatus::Observed) == 0 {
        return Err(Error::NoObservedCells);
    }
    let n = cfg.patch_size;

    while missing > 0 {
        let iteration = report.iterations;
        let boundary = extract_boundary(&out, state, n)?;
        let terms = priorities(&boundary, state, obstacles, txs, cfg)?;
        let values: Vec<f64> = terms.iter().map(|t| t.value).collect();
        let idx = select_patch(&boundary, &values).ok_or(Error::NoObservedCells)?;
        let center = boundary[idx].coord;

        let target = extract_patch(&out, state, center, n);
        if target.hole_count() == 0 {
            return Err(Error::NoProgress { iteration, center });
        }
        let (estimate, diagnostic) = estimator
            .estimate(&target, &out, state)
            .map_err(|e| Error::Estimator {
                iteration,
                source: Box::new(e),
            })?;
        let confidence = terms[idx].confidence;
        let filled = commit_patch(&mut out, state, &estimate, confidence)?;
        if filled == 0 {
            return Err(Error::NoProgress { iteration, center });
        }
        missing -= filled;
        report.cells_filled += filled;
        report.iterations += 1;
        report.fill_order.push(FillStep {
            iteration,
            center,
            priority: values[idx],
            confidence,
            cells_filled: filled,
            missing_after: missing,
            diagnostic,
        });
    }
    Ok((out, report))
}
