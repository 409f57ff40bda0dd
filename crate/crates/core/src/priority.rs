//! Fill-order priority.
//!
//! A boundary patch is ranked by the product of a confidence term (how much
//! of the patch is already known), a data term (how strongly texture runs
//! into the boundary), a block term (how little of the transmitter line of
//! sight crosses buildings) and a radio term (inverse-distance strength of
//! the propagation direction hitting the boundary). With several
//! transmitters the last two are summed per transmitter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellCoord, ObstacleMap, RadioMap, RegionState, Transmitter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorityMode {
    /// Confidence, data and block terms only.
    TextureOnly,
    /// All four terms.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityConfig {
    /// Odd patch edge length in cells.
    pub patch_size: usize,
    /// Inverse-distance exponent of the radio term.
    pub beta: f64,
    /// Data-term normalization; 1 for unit vectors.
    pub alpha: f64,
    /// Lower bound applied to the data, block and radio terms.
    pub term_floor: f64,
    /// Sampling step along the transmitter line, in cells.
    pub line_step: f64,
    pub mode: PriorityMode,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        Self {
            patch_size: 15,
            beta: 2.0,
            alpha: 1.0,
            term_floor: 1e-3,
            line_step: 0.25,
            mode: PriorityMode::Full,
        }
    }
}

impl PriorityConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.patch_size < 3 || self.patch_size % 2 == 0 {
            return bad("patch size must be odd and at least 3");
        }
        if !(self.beta >= 0.0) {
            return bad("beta must be non-negative");
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.term_floor > 0.0 && self.term_floor < 1.0) {
            return bad("term floor must lie in (0, 1)");
        }
        if !(self.line_step > 0.0 && self.line_step <= 1.0) {
            return bad("line step must lie in (0, 1]");
        }
        Ok(())
    }
}

/// 2-vector with `x` along columns and `y` along rows (downwards).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotated by 90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Unit vector, or zero if the norm vanishes.
    pub fn unit(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            Vec2::new(self.x / n, self.y / n)
        } else {
            Vec2::ZERO
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub coord: CellCoord,
    /// Unit normal of the fill front.
    pub normal: Vec2,
    /// Unit isophote (texture direction), zero where the patch is flat.
    pub isophote: Vec2,
}

/// Missing cells with at least one known 4-neighbor, in row-major order.
///
/// Errors if the grid has no known cell at all; returns an empty list if
/// nothing is missing.
pub fn extract_boundary(
    map: &RadioMap,
    state: &RegionState,
    patch_size: usize,
) -> Result<Vec<BoundaryPoint>> {
    let (rows, cols) = state.shape();
    let missing = state.missing_count();
    if missing == rows * cols {
        return Err(Error::NoObservedCells);
    }
    let mut out = Vec::new();
    if missing == 0 {
        return Ok(out);
    }
    for r in 0..rows {
        for c in 0..cols {
            if !state.is_missing(r, c) {
                continue;
            }
            if neighbors4(r, c, rows, cols).any(|(nr, nc)| state.is_known(nr, nc)) {
                let coord = CellCoord::new(r, c);
                out.push(BoundaryPoint {
                    coord,
                    normal: front_normal(state, coord),
                    isophote: isophote(map, state, coord, patch_size),
                });
            }
        }
    }
    Ok(out)
}

/// Up, down, left, right neighbors that lie inside the grid.
fn neighbors4(r: usize, c: usize, rows: usize, cols: usize) -> impl Iterator<Item = (usize, usize)> {
    let r = r as isize;
    let c = c as isize;
    [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
        .into_iter()
        .filter(move |&(nr, nc)| nr >= 0 && nc >= 0 && (nr as usize) < rows && (nc as usize) < cols)
        .map(|(nr, nc)| (nr as usize, nc as usize))
}

/// Sobel gradient of the missing indicator (edge-replicated), normalized.
/// Falls back to the direction of the first known 4-neighbor.
fn front_normal(state: &RegionState, p: CellCoord) -> Vec2 {
    let (rows, cols) = state.shape();
    let ind = |dr: isize, dc: isize| -> f64 {
        let r = (p.row as isize + dr).clamp(0, rows as isize - 1) as usize;
        let c = (p.col as isize + dc).clamp(0, cols as isize - 1) as usize;
        if state.is_missing(r, c) {
            1.0
        } else {
            0.0
        }
    };
    let gx = (ind(-1, 1) + 2.0 * ind(0, 1) + ind(1, 1)) - (ind(-1, -1) + 2.0 * ind(0, -1) + ind(1, -1));
    let gy = (ind(1, -1) + 2.0 * ind(1, 0) + ind(1, 1)) - (ind(-1, -1) + 2.0 * ind(-1, 0) + ind(-1, 1));
    let g = Vec2::new(gx, gy);
    if g.norm() > 1e-12 {
        return g.unit();
    }
    neighbors4(p.row, p.col, rows, cols)
        .find(|&(r, c)| state.is_known(r, c))
        .map(|(r, c)| Vec2::new(c as f64 - p.col as f64, r as f64 - p.row as f64))
        .unwrap_or(Vec2::new(0.0, 1.0))
}

/// Gradient at a known cell using only known neighbors: central differences
/// where both sides are known, one-sided where only one is.
fn known_gradient(map: &RadioMap, state: &RegionState, r: usize, c: usize) -> Vec2 {
    let (rows, cols) = state.shape();
    let at = |rr: isize, cc: isize| -> Option<f64> {
        if rr < 0 || cc < 0 || rr as usize >= rows || cc as usize >= cols {
            return None;
        }
        let (rr, cc) = (rr as usize, cc as usize);
        state.is_known(rr, cc).then(|| map.values[[rr, cc]])
    };
    let (ri, ci) = (r as isize, c as isize);
    let here = map.values[[r, c]];
    let diff = |minus: Option<f64>, plus: Option<f64>| match (minus, plus) {
        (Some(m), Some(p)) => (p - m) / 2.0,
        (None, Some(p)) => p - here,
        (Some(m), None) => here - m,
        (None, None) => 0.0,
    };
    Vec2::new(
        diff(at(ri, ci - 1), at(ri, ci + 1)),
        diff(at(ri - 1, ci), at(ri + 1, ci)),
    )
}

/// Unit isophote at `p`: the strongest known-cell gradient inside the patch,
/// rotated 90 degrees. Zero if the patch has no texture.
pub fn isophote(map: &RadioMap, state: &RegionState, p: CellCoord, patch_size: usize) -> Vec2 {
    let (rows, cols) = state.shape();
    let half = (patch_size / 2) as isize;
    let mut best = Vec2::ZERO;
    let mut best_mag = 0.0;
    for dr in -half..=half {
        for dc in -half..=half {
            let r = p.row as isize + dr;
            let c = p.col as isize + dc;
            if r < 0 || c < 0 || r as usize >= rows || c as usize >= cols {
                continue;
            }
            let (r, c) = (r as usize, c as usize);
            if !state.is_known(r, c) {
                continue;
            }
            let g = known_gradient(map, state, r, c);
            let mag = g.norm();
            if mag > best_mag {
                best_mag = mag;
                best = g;
            }
        }
    }
    best.perp().unit()
}

/// Summed confidence of known cells in the patch divided by `n * n`.
/// Off-grid cells count as zero.
pub fn confidence_term(state: &RegionState, p: CellCoord, patch_size: usize) -> f64 {
    let (rows, cols) = state.shape();
    let half = patch_size / 2;
    let r0 = p.row.saturating_sub(half);
    let c0 = p.col.saturating_sub(half);
    let r1 = (p.row + half).min(rows - 1);
    let c1 = (p.col + half).min(cols - 1);
    let mut sum = 0.0;
    for r in r0..=r1 {
        for c in c0..=c1 {
            if state.is_known(r, c) {
                sum += state.confidence(CellCoord::new(r, c));
            }
        }
    }
    sum / (patch_size * patch_size) as f64
}

pub fn data_term(bp: &BoundaryPoint, cfg: &PriorityConfig) -> f64 {
    (bp.isophote.dot(bp.normal).abs() / cfg.alpha).max(cfg.term_floor)
}

pub fn radio_term(tx: &Transmitter, bp: &BoundaryPoint, cfg: &PriorityConfig) -> Result<f64> {
    let dir = Vec2::new(bp.coord.col as f64 - tx.col, bp.coord.row as f64 - tx.row);
    let d = dir.norm();
    if d == 0.0 {
        return Err(Error::SingularDistance {
            id: tx.id,
            cell: bp.coord,
        });
    }
    let l = Vec2::new(dir.x / d, dir.y / d);
    Ok((d.powf(-cfg.beta) * l.dot(bp.normal).abs()).max(cfg.term_floor))
}

/// Clips the segment `a -> b` (points as `(row, col)`) to the grid rectangle
/// `[-0.5, rows - 0.5] x [-0.5, cols - 0.5]`. Returns `None` if nothing is
/// left.
fn clip_to_grid(a: (f64, f64), b: (f64, f64), rows: usize, cols: usize) -> Option<((f64, f64), (f64, f64))> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let d = (b.0 - a.0, b.1 - a.1);
    let checks = [
        (-d.0, a.0 + 0.5),
        (d.0, rows as f64 - 0.5 - a.0),
        (-d.1, a.1 + 0.5),
        (d.1, cols as f64 - 0.5 - a.1),
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| (a.0 + t * d.0, a.1 + t * d.1);
    Some((at(t0), at(t1)))
}

/// Fraction of the in-grid part of the segment `from -> to` that crosses
/// building cells, estimated from midpoint samples spaced at most `step`
/// apart. Coordinates are `(row, col)` in cell units.
pub fn blocked_fraction(obstacles: &ObstacleMap, from: (f64, f64), to: (f64, f64), step: f64) -> f64 {
    let (rows, cols) = obstacles.shape();
    let Some((a, b)) = clip_to_grid(from, to, rows, cols) else {
        return 0.0;
    };
    let len = (b.0 - a.0).hypot(b.1 - a.1);
    let samples = ((len / step).ceil() as usize).max(1);
    let mut blocked = 0usize;
    for i in 0..samples {
        let t = (i as f64 + 0.5) / samples as f64;
        let r = (a.0 + t * (b.0 - a.0)).round().clamp(0.0, rows as f64 - 1.0) as usize;
        let c = (a.1 + t * (b.1 - a.1)).round().clamp(0.0, cols as f64 - 1.0) as usize;
        if obstacles.is_building(r, c) {
            blocked += 1;
        }
    }
    blocked as f64 / samples as f64
}

pub fn block_term(obstacles: &ObstacleMap, tx: &Transmitter, p: CellCoord, cfg: &PriorityConfig) -> f64 {
    let frac = blocked_fraction(
        obstacles,
        (tx.row, tx.col),
        (p.row as f64, p.col as f64),
        cfg.line_step,
    );
    (1.0 - frac).max(cfg.term_floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityTerms {
    pub confidence: f64,
    pub data: f64,
    /// Block term alone in texture-only mode, otherwise the sum over
    /// transmitters of block times radio term.
    pub propagation: f64,
    pub value: f64,
}

/// Multiplies the terms; `per_tx` holds `(block, radio)` pairs.
pub fn combine(confidence: f64, data: f64, per_tx: &[(f64, f64)]) -> f64 {
    confidence * data * per_tx.iter().map(|(b, l)| b * l).sum::<f64>()
}

pub fn priority(
    bp: &BoundaryPoint,
    state: &RegionState,
    obstacles: &ObstacleMap,
    txs: &[Transmitter],
    cfg: &PriorityConfig,
) -> Result<PriorityTerms> {
    let confidence = confidence_term(state, bp.coord, cfg.patch_size);
    let data = data_term(bp, cfg);
    let propagation = match cfg.mode {
        PriorityMode::TextureOnly => match txs.first() {
            Some(tx) => block_term(obstacles, tx, bp.coord, cfg),
            None => 1.0,
        },
        PriorityMode::Full => {
            if txs.is_empty() {
                return Err(Error::NoTransmitters);
            }
            let mut sum = 0.0;
            for tx in txs {
                sum += block_term(obstacles, tx, bp.coord, cfg) * radio_term(tx, bp, cfg)?;
            }
            sum
        }
    };
    Ok(PriorityTerms {
        confidence,
        data,
        propagation,
        value: confidence * data * propagation,
    })
}

/// Priorities for every boundary point, evaluated in parallel.
pub fn priorities(
    boundary: &[BoundaryPoint],
    state: &RegionState,
    obstacles: &ObstacleMap,
    txs: &[Transmitter],
    cfg: &PriorityConfig,
) -> Result<Vec<PriorityTerms>> {
    boundary
        .par_iter()
        .map(|bp| priority(bp, state, obstacles, txs, cfg))
        .collect()
}

/// Index of the highest priority; ties go to the smallest `(row, col)`.
pub fn select_patch(boundary: &[BoundaryPoint], priorities: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (bp, &p)) in boundary.iter().zip(priorities).enumerate() {
        best = match best {
            None => Some(i),
            Some(j) => {
                let q = priorities[j];
                if p > q || (p == q && bp.coord < boundary[j].coord) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    best
}
