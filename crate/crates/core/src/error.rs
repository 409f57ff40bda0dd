use std::path::PathBuf;

use thiserror::Error;

use crate::grid::{CellCoord, Rect};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} at row {row}, col {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("grid is empty")]
    EmptyGrid,

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("rect (top={}, left={}, height={}, width={}) does not fit inside a {rows}x{cols} grid", .rect.top, .rect.left, .rect.height, .rect.width)]
    RectOutOfBounds { rect: Rect, rows: usize, cols: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no observed cells: nothing to reconstruct from")]
    NoObservedCells,

    #[error("transmitter {id} coincides with cell ({}, {}); distance is zero", .cell.row, .cell.col)]
    SingularDistance { id: u32, cell: CellCoord },

    #[error("full priority mode needs at least one transmitter")]
    NoTransmitters,

    #[error("no fully observed {patch_size}x{patch_size} window exists; try a smaller patch size")]
    NoCandidateWindow { patch_size: usize },

    #[error("patch centered at ({}, {}) has no valid cells", .0.row, .0.col)]
    NoValidCells(CellCoord),

    #[error("non-finite estimate at row {row}, col {col}")]
    NonFiniteEstimate { row: usize, col: usize },

    #[error("iteration {iteration}: selected patch at ({}, {}) contains no missing cells", .center.row, .center.col)]
    NoProgress { iteration: usize, center: CellCoord },

    #[error("iteration {iteration}: {source}")]
    Estimator {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training samples are all zero")]
    DegenerateSamples,

    #[error("dictionary patch size {dictionary} does not match patch size {patch}")]
    DictionaryMismatch { dictionary: usize, patch: usize },

    #[error("region is empty")]
    EmptyRegion,

    #[error("truth has zero energy over the region; normalized error is undefined")]
    ZeroEnergy,

    #[error("linear system is singular")]
    Singular,

    #[error("observed cells are all at the same distance from the transmitter")]
    DegenerateDistances,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
