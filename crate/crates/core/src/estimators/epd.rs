use ndarray::{Array1, Array2};
use rand::Rng;

use super::ksvd::Dictionary;
use super::sparse::{sparse_code, SparseCode};
use super::EstimatorConfig;
use crate::error::{Error, Result};
use crate::fill::{Patch, PatchEstimator, Validity};
use crate::grid::{RadioMap, RegionState};

/// Draws `count` windows uniformly (with replacement) from the positions
/// whose cells were all originally observed. Each window is flattened
/// column-major.
pub fn sample_training_patches<R: Rng>(
    map: &RadioMap,
    state: &RegionState,
    count: usize,
    patch_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let (rows, cols) = map.shape();
    let n = patch_size;
    let none = || Error::NoCandidateWindow { patch_size: n };
    if n > rows || n > cols {
        return Err(none());
    }
    let mut sat = Array2::<u32>::zeros((rows + 1, cols + 1));
    for r in 0..rows {
        for c in 0..cols {
            let bad = !state.was_observed(r, c) as u32;
            sat[[r + 1, c + 1]] = bad + sat[[r, c + 1]] + sat[[r + 1, c]] - sat[[r, c]];
        }
    }
    let mut legal = Vec::new();
    for top in 0..=rows - n {
        for left in 0..=cols - n {
            if sat[[top + n, left + n]] + sat[[top, left]] - sat[[top, left + n]] - sat[[top + n, left]] == 0 {
                legal.push((top, left));
            }
        }
    }
    if legal.is_empty() {
        return Err(none());
    }
    Ok((0..count)
        .map(|_| {
            let (top, left) = legal[rng.gen_range(0..legal.len())];
            let mut v = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    v.push(map.values[[top + i, left + j]]);
                }
            }
            v
        })
        .collect())
}

/// Sparse-codes the valid part of the target against the matching atom rows
/// and fills the holes with the dictionary synthesis.
pub fn epd_fill(target: &Patch, dict: &Dictionary, cfg: &EstimatorConfig) -> Result<(Patch, SparseCode)> {
    if dict.patch_size != target.size {
        return Err(Error::DictionaryMismatch {
            dictionary: dict.patch_size,
            patch: target.size,
        });
    }
    let x = target.to_column_vector();
    let validity = target.validity_column_vector();
    let rows: Vec<usize> = (0..x.len()).filter(|&i| validity[i] == Validity::Valid).collect();
    if rows.is_empty() {
        return Err(Error::NoValidCells(target.center));
    }
    let k = dict.atom_count();
    let a_obs = Array2::from_shape_fn((rows.len(), k), |(i, j)| dict.atoms[[rows[i], j]]);
    let x_obs = Array1::from_iter(rows.iter().map(|&i| x[i]));
    let code = sparse_code(x_obs.view(), a_obs.view(), cfg.lambda, cfg.sparse_max_iters, cfg.sparse_tol);

    let mut out = target.clone();
    let n = target.size;
    for ((i, j), &v) in target.validity.indexed_iter() {
        if v != Validity::Hole {
            continue;
        }
        let row = dict.atoms.row(j * n + i);
        let mut value = row.dot(&code.coefficients);
        if cfg.clamp_output {
            value = value.clamp(0.0, 1.0);
        }
        out.values[[i, j]] = value;
    }
    Ok((out, code))
}

#[derive(Debug, Clone)]
pub struct DictionaryEstimator {
    pub dictionary: Dictionary,
    pub config: EstimatorConfig,
}

impl DictionaryEstimator {
    pub fn new(dictionary: Dictionary, config: &EstimatorConfig) -> Self {
        Self {
            dictionary,
            config: config.clone(),
        }
    }
}

impl PatchEstimator for DictionaryEstimator {
    fn estimate(&self, target: &Patch, _map: &RadioMap, _state: &RegionState) -> Result<(Patch, f64)> {
        let (patch, code) = epd_fill(target, &self.dictionary, &self.config)?;
        Ok((patch, code.objective))
    }

    fn name(&self) -> &'static str {
        "epd"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ksvd::TrainingMeta;
    use crate::fill::extract_patch;
    use crate::grid::{init_region_state, CellCoord, Rect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_dict(n: usize, k: usize, seed: u64) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut atoms = Array2::<f64>::from_shape_fn((n * n, k), |_| rng.gen_range(-1.0..1.0));
        for mut c in atoms.columns_mut() {
            let norm = c.dot(&c).sqrt();
            c /= norm;
        }
        Dictionary {
            atoms,
            patch_size: n,
            meta: TrainingMeta::default(),
        }
    }

    #[test]
    fn single_legal_window() {
        let map = RadioMap::from_normalized(Array2::from_shape_fn((3, 4), |(r, c)| (r * 4 + c) as f64 / 12.0)).unwrap();
        let state = init_region_state(&map, Rect::new(0, 3, 3, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_training_patches(&map, &state, 1, 3, &mut rng).unwrap();
        // Column-major flattening of the left 3x3 window.
        let want: Vec<f64> = [0, 4, 8, 1, 5, 9, 2, 6, 10].iter().map(|&v| v as f64 / 12.0).collect();
        assert_eq!(s, vec![want]);
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let map = RadioMap::from_normalized(Array2::from_shape_fn((20, 20), |_| rng.gen())).unwrap();
        let state = init_region_state(&map, Rect::new(5, 5, 5, 5)).unwrap();
        let a = sample_training_patches(&map, &state, 50, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_training_patches(&map, &state, 50, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_is_uniform_over_legal_positions() {
        // 3x7 grid, 3x3 windows: five legal positions, each with a unique
        // top-left value.
        let map = RadioMap::from_normalized(Array2::from_shape_fn((3, 7), |(r, c)| (r * 7 + c) as f64 / 21.0)).unwrap();
        let state = RegionState::from_mask(&Array2::from_elem((3, 7), false)).unwrap();
        let draws = 10_000;
        let s = sample_training_patches(&map, &state, draws, 3, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
        let mut counts = [0usize; 5];
        for v in &s {
            counts[(v[0] * 21.0).round() as usize] += 1;
        }
        let expect = draws as f64 / 5.0;
        let sigma = (draws as f64 * 0.2 * 0.8).sqrt();
        let mut chi2 = 0.0;
        for &c in &counts {
            assert!((c as f64 - expect).abs() <= 3.0 * sigma, "{counts:?}");
            chi2 += (c as f64 - expect).powi(2) / expect;
        }
        // 99.9th percentile of chi-square with 4 degrees of freedom.
        assert!(chi2 < 18.47, "{chi2}");
    }

    #[test]
    fn no_fully_observed_window() {
        let map = RadioMap::from_normalized(Array2::zeros((4, 4))).unwrap();
        let state = init_region_state(&map, Rect::new(1, 1, 2, 2)).unwrap();
        assert!(sample_training_patches(&map, &state, 3, 3, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn reconstructs_scaled_atom() {
        let dict = random_dict(3, 4, 2);
        let n = 3;
        let atom = dict.atoms.column(1);
        let truth = Array2::from_shape_fn((5, 5), |(r, c)| {
            if (1..4).contains(&r) && (1..4).contains(&c) {
                0.5 * atom[(c - 1) * n + (r - 1)]
            } else {
                0.0
            }
        });
        let map = RadioMap::from_normalized(truth.clone()).unwrap();
        let mut mask = Array2::from_elem((5, 5), false);
        mask[[2, 2]] = true;
        mask[[1, 3]] = true;
        let state = RegionState::from_mask(&mask).unwrap();
        let target = extract_patch(&map, &state, CellCoord::new(2, 2), 3);
        let cfg = EstimatorConfig {
            lambda: 1e-12,
            sparse_max_iters: 100_000,
            sparse_tol: 1e-14,
            clamp_output: false,
            ..EstimatorConfig::default()
        };
        let (out, _) = epd_fill(&target, &dict, &cfg).unwrap();
        assert!((out.values[[1, 1]] - truth[[2, 2]]).abs() < 1e-6);
        assert!((out.values[[0, 2]] - truth[[1, 3]]).abs() < 1e-6);
    }

    #[test]
    fn valid_cells_are_untouched_and_clamp_holds() {
        let dict = random_dict(3, 6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let map = RadioMap::from_normalized(Array2::from_shape_fn((8, 8), |_| rng.gen())).unwrap();
        for _ in 0..30 {
            let mut mask = Array2::from_shape_fn((8, 8), |_| rng.gen_bool(0.4));
            let center = CellCoord::new(rng.gen_range(0..8), rng.gen_range(0..8));
            mask[[center.row, center.col]] = false;
            let state = RegionState::from_mask(&mask).unwrap();
            let target = extract_patch(&map, &state, center, 3);
            let cfg = EstimatorConfig {
                lambda: 0.0,
                ..EstimatorConfig::default()
            };
            let (out, _) = epd_fill(&target, &dict, &cfg).unwrap();
            for ((i, j), v) in target.validity.indexed_iter() {
                if *v == Validity::Valid {
                    assert_eq!(out.values[[i, j]].to_bits(), target.values[[i, j]].to_bits());
                } else if *v == Validity::Hole {
                    assert!((0.0..=1.0).contains(&out.values[[i, j]]));
                }
            }
        }
    }

    #[test]
    fn zero_holes_is_a_no_op_and_no_valid_cells_fails() {
        let dict = random_dict(3, 4, 5);
        let map = RadioMap::from_normalized(Array2::from_elem((6, 6), 0.3)).unwrap();
        let state = init_region_state(&map, Rect::new(0, 0, 1, 1)).unwrap();
        let target = extract_patch(&map, &state, CellCoord::new(3, 3), 3);
        let (out, _) = epd_fill(&target, &dict, &EstimatorConfig::default()).unwrap();
        assert_eq!(out, target);

        let hole = init_region_state(&map, Rect::new(1, 1, 4, 4)).unwrap();
        let target = extract_patch(&map, &hole, CellCoord::new(2, 2), 3);
        assert!(matches!(
            epd_fill(&target, &dict, &EstimatorConfig::default()),
            Err(Error::NoValidCells(_))
        ));
    }
}
