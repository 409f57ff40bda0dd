//! Reconstruction of missing rectangular regions in gridded radio maps.
//!
//! The fill loop in [`fill`] repeatedly picks the boundary patch with the
//! highest [`priority`], estimates its missing cells with one of the
//! [`estimators`] and commits them, until the restricted region is filled.
//! [`baselines`] and [`metrics`] provide reference reconstructions and
//! scoring; [`scenegen`] produces seeded synthetic scenes.

pub mod baselines;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod fill;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pgm;
pub mod priority;
pub mod scenegen;

pub use error::{Error, Result};
pub use fill::{reconstruct, FillReport, Patch, PatchEstimator};
pub use grid::{
    denormalize, init_region_state, normalize, CellCoord, CellStatus, ObstacleMap, RadioMap, Rect, RegionState,
    Transmitter,
};
pub use priority::{PriorityConfig, PriorityMode};
