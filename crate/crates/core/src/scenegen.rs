//! Seeded synthetic scenes: a log-distance path-loss field attenuated by
//! buildings along the line of sight and modulated by smooth shadowing.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{normalize, CellCoord, ObstacleMap, RadioMap, Rect, Transmitter};
use crate::priority::blocked_fraction;

/// Sampling step for the line-of-sight attenuation.
const LINE_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Empty,
    /// Tall, narrow building columns separated by narrow gaps.
    VerticalStripes,
    /// Irregular rectangular blocks on a street grid.
    CityBlocks,
    Rects(Vec<Rect>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub rows: usize,
    pub cols: usize,
    /// Transmitter position `(row, col)` in cell units.
    pub tx: (f64, f64),
    pub pathloss_exponent: f64,
    /// Power at unit distance, in watts.
    pub reference_power: f64,
    /// Power factor for a line of sight fully inside buildings, in (0, 1].
    pub attenuation: f64,
    pub layout: Layout,
    /// Log-amplitude of the multiplicative shadowing field.
    pub shadow_amplitude: f64,
    /// Shadowing correlation length in cells.
    pub correlation_length: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            rows: 120,
            cols: 160,
            tx: (-40.0, 80.0),
            pathloss_exponent: 2.0,
            reference_power: 1.0,
            attenuation: 0.3,
            layout: Layout::VerticalStripes,
            shadow_amplitude: 0.3,
            correlation_length: 12.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.rows < 8 || self.cols < 8 {
            return bad("scene must be at least 8x8");
        }
        if !(self.attenuation > 0.0 && self.attenuation <= 1.0) {
            return bad("attenuation must lie in (0, 1]");
        }
        if !(self.shadow_amplitude >= 0.0) {
            return bad("shadow amplitude must be non-negative");
        }
        if !(self.correlation_length > 0.0) {
            return bad("correlation length must be positive");
        }
        if !(self.reference_power > 0.0) || !self.pathloss_exponent.is_finite() {
            return bad("reference power must be positive and the exponent finite");
        }
        if !self.tx.0.is_finite() || !self.tx.1.is_finite() {
            return bad("transmitter position must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Ground truth in watts.
    pub raw: Array2<f64>,
    pub map: RadioMap,
    pub obstacles: ObstacleMap,
    pub tx: Transmitter,
}

fn fill_rect(cells: &mut Array2<bool>, r0: usize, c0: usize, h: usize, w: usize) {
    let (rows, cols) = cells.dim();
    for r in r0..(r0 + h).min(rows) {
        for c in c0..(c0 + w).min(cols) {
            cells[[r, c]] = true;
        }
    }
}

fn build_layout(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> ObstacleMap {
    let (rows, cols) = (spec.rows, spec.cols);
    let mut cells = Array2::from_elem((rows, cols), false);
    match &spec.layout {
        Layout::Empty => {}
        Layout::Rects(rects) => {
            for r in rects {
                fill_rect(&mut cells, r.top, r.left, r.height, r.width);
            }
        }
        Layout::VerticalStripes => {
            let period = 10;
            let width = 3;
            let offset = rng.gen_range(0..period);
            let mut top = rng.gen_range(0..6);
            while top < rows {
                let height = rng.gen_range(18..30);
                let mut left = offset;
                while left < cols {
                    fill_rect(&mut cells, top, left, height, width);
                    left += period;
                }
                top += height + rng.gen_range(3..6);
            }
        }
        Layout::CityBlocks => {
            let mut top = rng.gen_range(0..4);
            while top < rows {
                let bh = rng.gen_range(6..16);
                let mut left = rng.gen_range(0..4);
                while left < cols {
                    let bw = rng.gen_range(6..18);
                    if rng.gen_bool(0.8) {
                        // A building of random footprint inside the block.
                        let h = rng.gen_range(bh / 2..=bh);
                        let w = rng.gen_range(bw / 2..=bw);
                        let dr = rng.gen_range(0..=bh - h);
                        let dc = rng.gen_range(0..=bw - w);
                        fill_rect(&mut cells, top + dr, left + dc, h, w);
                    }
                    left += bw + rng.gen_range(3..6);
                }
                top += bh + rng.gen_range(3..6);
            }
        }
    }
    ObstacleMap { cells }
}

/// Smooth value noise in roughly `[-1, 1]`: two octaves of random lattice
/// values blended with smoothstep weights.
fn value_noise(rows: usize, cols: usize, length: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut out = Array2::zeros((rows, cols));
    let mut amp = 1.0;
    let mut total = 0.0;
    let mut scale = length;
    for _ in 0..2 {
        let lr = (rows as f64 / scale).ceil() as usize + 2;
        let lc = (cols as f64 / scale).ceil() as usize + 2;
        let lattice = Array2::from_shape_fn((lr, lc), |_| rng.gen_range(-1.0..1.0));
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        for ((r, c), v) in out.indexed_iter_mut() {
            let y = r as f64 / scale;
            let x = c as f64 / scale;
            let (i, j) = (y.floor() as usize, x.floor() as usize);
            let (ty, tx) = (smooth(y - i as f64), smooth(x - j as f64));
            let top = lattice[[i, j]] * (1.0 - tx) + lattice[[i, j + 1]] * tx;
            let bottom = lattice[[i + 1, j]] * (1.0 - tx) + lattice[[i + 1, j + 1]] * tx;
            *v += amp * (top * (1.0 - ty) + bottom * ty);
        }
        total += amp;
        amp *= 0.5;
        scale = (scale / 2.0).max(1.0);
    }
    out.mapv_inplace(|v| v / total);
    out
}

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let obstacles = build_layout(spec, &mut rng);
    // Separate stream so the shadowing does not depend on the layout.
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);
    let noise = value_noise(spec.rows, spec.cols, spec.correlation_length, &mut noise_rng);
    let tx = Transmitter::new(spec.tx.0, spec.tx.1);
    let raw = Array2::from_shape_fn((spec.rows, spec.cols), |(r, c)| {
        let cell = CellCoord::new(r, c);
        let d = tx.distance_to(cell).max(1.0);
        let mut p = spec.reference_power * d.powf(-spec.pathloss_exponent);
        if spec.attenuation < 1.0 {
            let frac = blocked_fraction(&obstacles, (tx.row, tx.col), (r as f64, c as f64), LINE_STEP);
            p *= spec.attenuation.powf(frac);
        }
        p * (spec.shadow_amplitude * noise[[r, c]]).exp()
    });
    let map = normalize(&raw)?;
    Ok(Scene {
        raw,
        map,
        obstacles,
        tx,
    })
}

/// A `height x width` rectangle placed uniformly at random, at least
/// `margin` cells from every edge.
pub fn random_rect<R: Rng>(rows: usize, cols: usize, height: usize, width: usize, margin: usize, rng: &mut R) -> Result<Rect> {
    if height + 2 * margin > rows || width + 2 * margin > cols {
        return Err(Error::InvalidConfig(format!(
            "a {height}x{width} region with margin {margin} does not fit in {rows}x{cols}"
        )));
    }
    let top = rng.gen_range(margin..=rows - margin - height);
    let left = rng.gen_range(margin..=cols - margin - width);
    Ok(Rect::new(top, left, height, width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::fit_ldpl;
    use crate::grid::init_region_state;

    #[test]
    fn empty_noiseless_scene_is_pure_ldpl() {
        let spec = SceneSpec {
            rows: 40,
            cols: 50,
            layout: Layout::Empty,
            shadow_amplitude: 0.0,
            pathloss_exponent: 2.7,
            ..SceneSpec::default()
        };
        let scene = generate(&spec).unwrap();
        let state = init_region_state(&scene.map, Rect::new(10, 10, 10, 10)).unwrap();
        let fit = fit_ldpl(&scene.map, &state, &scene.tx).unwrap();
        assert!((fit.gamma - 2.7).abs() < 1e-6, "{}", fit.gamma);
    }

    #[test]
    fn neutral_attenuation_ignores_buildings() {
        let base = SceneSpec {
            rows: 30,
            cols: 30,
            attenuation: 1.0,
            ..SceneSpec::default()
        };
        let with = generate(&base).unwrap();
        let without = generate(&SceneSpec {
            layout: Layout::Empty,
            ..base.clone()
        })
        .unwrap();
        assert!(with.obstacles.cells.iter().any(|&b| b));
        assert_eq!(with.raw, without.raw);
    }

    #[test]
    fn same_seed_same_scene_and_different_seeds_differ() {
        for layout in [Layout::VerticalStripes, Layout::CityBlocks] {
            let spec = SceneSpec {
                rows: 40,
                cols: 40,
                layout,
                seed: 3,
                ..SceneSpec::default()
            };
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a, b);
            let c = generate(&SceneSpec { seed: 4, ..spec }).unwrap();
            assert_ne!(a.raw, c.raw);
        }
    }

    #[test]
    fn power_decays_along_unobstructed_rays() {
        let spec = SceneSpec {
            rows: 40,
            cols: 40,
            tx: (-5.0, 20.0),
            layout: Layout::Empty,
            shadow_amplitude: 0.0,
            ..SceneSpec::default()
        };
        let s = generate(&spec).unwrap();
        for r in 1..40 {
            assert!(s.raw[[r, 20]] <= s.raw[[r - 1, 20]]);
        }
    }

    #[test]
    fn maps_are_finite_and_normalized() {
        for seed in 0..5 {
            let s = generate(&SceneSpec {
                seed,
                layout: Layout::CityBlocks,
                ..SceneSpec::default()
            })
            .unwrap();
            assert!(s.map.values.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate(&SceneSpec {
            rows: 4,
            ..SceneSpec::default()
        })
        .is_err());
        assert!(generate(&SceneSpec {
            attenuation: 0.0,
            ..SceneSpec::default()
        })
        .is_err());
    }
}
