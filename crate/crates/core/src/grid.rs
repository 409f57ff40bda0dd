//! Grid data model: the radio map, per-cell region state, obstacles and
//! transmitters.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer cell index into a `rows x cols` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellCoord {
    pub row: usize,
    pub col: usize,
}

impl CellCoord {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Axis-aligned rectangle in cell units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self {
            top,
            left,
            height,
            width,
        }
    }

    pub fn fits(&self, rows: usize, cols: usize) -> bool {
        self.height <= rows
            && self.width <= cols
            && self.top + self.height <= rows
            && self.left + self.width <= cols
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top
            && row < self.top + self.height
            && col >= self.left
            && col < self.left + self.width
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn cells(&self) -> impl Iterator<Item = CellCoord> + '_ {
        (self.top..self.top + self.height)
            .flat_map(move |r| (self.left..self.left + self.width).map(move |c| CellCoord::new(r, c)))
    }

    pub fn check(&self, rows: usize, cols: usize) -> Result<()> {
        if self.fits(rows, cols) {
            Ok(())
        } else {
            Err(Error::RectOutOfBounds {
                rect: *self,
                rows,
                cols,
            })
        }
    }
}

/// Dense grid of normalized PSD values.
///
/// `values` lives in `[0, 1]` after [`normalize`]; `norm_min`/`norm_max` are
/// the watt values that map to 0 and 1, so the original map can be restored
/// with [`denormalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub values: Array2<f64>,
    /// Meters per cell edge. Informational only; all geometry is in cells.
    pub cell_size: f64,
    pub norm_min: f64,
    pub norm_max: f64,
}

impl RadioMap {
    /// Wraps already-normalized values with identity normalization metadata.
    pub fn from_normalized(values: Array2<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(Self {
            values,
            cell_size: 1.0,
            norm_min: 0.0,
            norm_max: 1.0,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn get(&self, cell: CellCoord) -> f64 {
        self.values[[cell.row, cell.col]]
    }

    /// Maps a normalized value back to watts.
    pub fn to_raw(&self, v: f64) -> f64 {
        v * (self.norm_max - self.norm_min) + self.norm_min
    }

    /// Maps a watt value into this map's normalized range. Constant maps
    /// send everything to 0.
    pub fn to_normalized(&self, raw: f64) -> f64 {
        let span = self.norm_max - self.norm_min;
        if span > 0.0 {
            (raw - self.norm_min) / span
        } else {
            0.0
        }
    }
}

fn check_finite(values: &Array2<f64>) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for ((row, col), &value) in values.indexed_iter() {
        if !value.is_finite() {
            return Err(Error::NonFinite { row, col, value });
        }
    }
    Ok(())
}

/// Linearly rescales a watt-valued grid into `[0, 1]`.
pub fn normalize(raw: &Array2<f64>) -> Result<RadioMap> {
    check_finite(raw)?;
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let values = if span > 0.0 {
        raw.mapv(|v| ((v - min) / span).clamp(0.0, 1.0))
    } else {
        Array2::zeros(raw.dim())
    };
    Ok(RadioMap {
        values,
        cell_size: 1.0,
        norm_min: min,
        norm_max: max,
    })
}

pub fn denormalize(map: &RadioMap) -> Array2<f64> {
    map.values.mapv(|v| map.to_raw(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellStatus {
    Observed,
    Missing,
    Filled,
}

/// Per-cell reconstruction status and confidence.
///
/// `original_observed` is the observed set at construction time and never
/// changes afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionState {
    status: Array2<CellStatus>,
    confidence: Array2<f64>,
    original_observed: Array2<bool>,
}

impl RegionState {
    /// Builds the state from a restricted-area mask (`true` = missing).
    pub fn from_mask(mask: &Array2<bool>) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let status = mask.mapv(|m| if m { CellStatus::Missing } else { CellStatus::Observed });
        let confidence = mask.mapv(|m| if m { 0.0 } else { 1.0 });
        let original_observed = mask.mapv(|m| !m);
        Ok(Self {
            status,
            confidence,
            original_observed,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.status.dim()
    }

    pub fn status(&self, cell: CellCoord) -> CellStatus {
        self.status[[cell.row, cell.col]]
    }

    pub fn status_grid(&self) -> &Array2<CellStatus> {
        &self.status
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.status[[row, col]] == CellStatus::Missing
    }

    /// Observed or filled.
    pub fn is_known(&self, row: usize, col: usize) -> bool {
        !self.is_missing(row, col)
    }

    pub fn confidence(&self, cell: CellCoord) -> f64 {
        self.confidence[[cell.row, cell.col]]
    }

    pub fn confidence_grid(&self) -> &Array2<f64> {
        &self.confidence
    }

    pub fn was_observed(&self, row: usize, col: usize) -> bool {
        self.original_observed[[row, col]]
    }

    pub fn original_observed(&self) -> &Array2<bool> {
        &self.original_observed
    }

    /// Marks a missing cell as filled with the given confidence.
    /// Returns false (and changes nothing) if the cell was not missing.
    pub fn mark_filled(&mut self, cell: CellCoord, confidence: f64) -> bool {
        let idx = [cell.row, cell.col];
        if self.status[idx] != CellStatus::Missing {
            return false;
        }
        self.status[idx] = CellStatus::Filled;
        self.confidence[idx] = confidence;
        true
    }

    pub fn count(&self, which: CellStatus) -> usize {
        self.status.iter().filter(|&&s| s == which).count()
    }

    pub fn missing_count(&self) -> usize {
        self.count(CellStatus::Missing)
    }

    pub fn missing_mask(&self) -> Array2<bool> {
        self.status.mapv(|s| s == CellStatus::Missing)
    }
}

/// Marks `restricted` as missing and everything else as observed.
pub fn init_region_state(map: &RadioMap, restricted: Rect) -> Result<RegionState> {
    let (rows, cols) = map.shape();
    restricted.check(rows, cols)?;
    let mask = Array2::from_shape_fn((rows, cols), |(r, c)| restricted.contains(r, c));
    RegionState::from_mask(&mask)
}

/// Building footprint; `true` marks a building cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMap {
    pub cells: Array2<bool>,
}

impl ObstacleMap {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            cells: Array2::from_elem((rows, cols), false),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.cells.dim()
    }

    pub fn is_building(&self, row: usize, col: usize) -> bool {
        self.cells[[row, col]]
    }
}

/// Transmitter position in continuous cell coordinates; cell `(r, c)` has
/// its center at `(r as f64, c as f64)`. The position may lie off-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmitter {
    pub row: f64,
    pub col: f64,
    pub id: u32,
}

impl Transmitter {
    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col, id: 0 }
    }

    pub fn with_id(mut self, id: u32) -> Self {
        self.id = id;
        self
    }

    pub fn distance_to(&self, cell: CellCoord) -> f64 {
        let dr = cell.row as f64 - self.row;
        let dc = cell.col as f64 - self.col;
        dr.hypot(dc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalize_linear_endpoints() {
        let map = normalize(&array![[2.0, 4.0], [6.0, 10.0]]).unwrap();
        assert_eq!(map.values, array![[0.0, 0.25], [0.5, 1.0]]);
        assert_eq!((map.norm_min, map.norm_max), (2.0, 10.0));
    }

    #[test]
    fn normalize_constant_map() {
        let map = normalize(&Array2::from_elem((2, 2), 5.0)).unwrap();
        assert!(map.values.iter().all(|&v| v == 0.0));
        assert_eq!((map.norm_min, map.norm_max), (5.0, 5.0));
        assert!(denormalize(&map).iter().all(|&v| v == 5.0));
    }

    #[test]
    fn normalize_rejects_non_finite() {
        let err = normalize(&array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1, .. }));
    }

    #[test]
    fn denormalize_endpoints() {
        let map = RadioMap {
            values: array![[0.0, 1.0]],
            cell_size: 1.0,
            norm_min: 2.0,
            norm_max: 10.0,
        };
        assert_eq!(denormalize(&map), array![[2.0, 10.0]]);
    }

    #[test]
    fn round_trip_random_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let raw = Array2::from_shape_fn((10, 10), |_| rng.gen_range(0.1..3.0));
        let back = denormalize(&normalize(&raw).unwrap());
        for (a, b) in raw.iter().zip(back.iter()) {
            assert!(((a - b) / a).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn region_state_counts() {
        let map = RadioMap::from_normalized(Array2::zeros((10, 10))).unwrap();
        let state = init_region_state(&map, Rect::new(2, 2, 4, 4)).unwrap();
        assert_eq!(state.missing_count(), 16);
        assert_eq!(state.count(CellStatus::Observed), 84);

        let whole = init_region_state(&map, Rect::new(0, 0, 10, 10)).unwrap();
        assert_eq!(whole.count(CellStatus::Observed), 0);

        let one = init_region_state(&map, Rect::new(0, 0, 1, 1)).unwrap();
        assert_eq!(one.missing_count(), 1);
        assert_eq!(one.confidence(CellCoord::new(0, 0)), 0.0);
        assert_eq!(one.confidence(CellCoord::new(0, 1)), 1.0);
    }

    #[test]
    fn region_state_rejects_out_of_bounds_rect() {
        let map = RadioMap::from_normalized(Array2::zeros((10, 10))).unwrap();
        let err = init_region_state(&map, Rect::new(8, 8, 4, 1)).unwrap_err();
        assert!(matches!(err, Error::RectOutOfBounds { .. }));
    }

    #[test]
    fn mark_filled_only_touches_missing() {
        let map = RadioMap::from_normalized(Array2::zeros((4, 4))).unwrap();
        let mut state = init_region_state(&map, Rect::new(1, 1, 2, 2)).unwrap();
        assert!(!state.mark_filled(CellCoord::new(0, 0), 0.5));
        assert!(state.mark_filled(CellCoord::new(1, 1), 0.5));
        assert!(!state.mark_filled(CellCoord::new(1, 1), 0.2));
        assert_eq!(state.confidence(CellCoord::new(1, 1)), 0.5);
        assert_eq!(state.count(CellStatus::Filled), 1);
        assert_eq!(state.missing_count(), 3);
    }

    proptest::proptest! {
        #[test]
        fn normalize_is_monotone(vals in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            let n = vals.len();
            let raw = Array2::from_shape_vec((1, n), vals.clone()).unwrap();
            let map = normalize(&raw).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if vals[i] <= vals[j] {
                        proptest::prop_assert!(map.values[[0, i]] <= map.values[[0, j]]);
                    }
                }
            }
        }
    }
}
