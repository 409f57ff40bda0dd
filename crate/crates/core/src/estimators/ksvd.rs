//! K-SVD dictionary learning.
//!
//! Each iteration sparse-codes every sample with batch OMP, then refits the
//! atoms one at a time with a rank-1 approximation of the residual restricted
//! to the samples that use the atom. A sample keeps its previous code when
//! the fresh OMP code reconstructs it worse, and each rank-1 refit starts
//! from the current atom, so the training error never increases.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::parse_grid;

#[derive(Debug, Clone, PartialEq)]
pub struct KsvdConfig {
    pub atoms: usize,
    pub iterations: usize,
    /// Nonzeros per sample in the coding stage.
    pub sparsity: usize,
}

/// Coding-stage sparsity for a dictionary of `atoms` atoms: `ceil(atoms / 50)`.
pub fn omp_sparsity(atoms: usize) -> usize {
    atoms.div_ceil(50).max(1)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingMeta {
    pub samples: usize,
    pub iterations: usize,
    /// Mean squared reconstruction error after each iteration.
    pub errors: Vec<f64>,
}

impl TrainingMeta {
    pub fn final_error(&self) -> Option<f64> {
        self.errors.last().copied()
    }
}

/// `n^2 x K` matrix of unit-norm atoms; each column is a column-major
/// flattened `n x n` patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub atoms: Array2<f64>,
    pub patch_size: usize,
    pub meta: TrainingMeta,
}

impl Dictionary {
    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atom_norms(&self) -> Vec<f64> {
        self.atoms.map_axis(Axis(0), |c| c.dot(&c).sqrt()).to_vec()
    }

    /// First line `K,n`, then `n^2` lines of `K` values.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.atom_count(), self.patch_size);
        for row in self.atoms.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let (header, body) = text.split_once('\n').ok_or_else(|| parse_err(1, "missing header".into()))?;
        let fields: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        let [k, n] = fields[..] else {
            return Err(parse_err(1, "header must be `K,n`".into()));
        };
        let k: usize = k.parse().map_err(|_| parse_err(1, format!("bad atom count {k:?}")))?;
        let n: usize = n.parse().map_err(|_| parse_err(1, format!("bad patch size {n:?}")))?;
        let atoms = parse_grid(body, origin)?;
        if atoms.dim() != (n * n, k) {
            return Err(Error::ShapeMismatch {
                expected: (n * n, k),
                actual: atoms.dim(),
            });
        }
        Ok(Self {
            atoms,
            patch_size: n,
            meta: TrainingMeta::default(),
        })
    }
}

/// Sparse code of one sample: support indices and their coefficients.
type Code = Vec<(usize, f64)>;

/// Batch OMP against a precomputed Gram matrix. `dtx` holds the atom
/// correlations of the sample.
fn batch_omp(gram: &Array2<f64>, dtx: ArrayView1<f64>, sparsity: usize) -> Code {
    let k = dtx.len();
    let scale = dtx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut support: Vec<usize> = Vec::with_capacity(sparsity);
    let mut coef: Vec<f64> = Vec::new();
    let mut alpha = dtx.to_owned();
    while support.len() < sparsity.min(k) {
        let mut best = None;
        let mut best_val = 1e-10 * scale;
        for (j, &a) in alpha.iter().enumerate() {
            if a.abs() > best_val && !support.contains(&j) {
                best_val = a.abs();
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        support.push(j);
        let s = support.len();
        let g = DMatrix::from_fn(s, s, |a, b| gram[[support[a], support[b]]]);
        let rhs = DVector::from_iterator(s, support.iter().map(|&i| dtx[i]));
        let Some(chol) = g.cholesky() else {
            support.pop();
            break;
        };
        let sol = chol.solve(&rhs);
        coef = sol.iter().copied().collect();
        alpha.assign(&dtx);
        for (idx, &atom) in support.iter().enumerate() {
            // The Gram matrix is symmetric; rows are contiguous.
            alpha.scaled_add(-coef[idx], &gram.row(atom));
        }
    }
    support.into_iter().zip(coef).collect()
}

fn residual_of(x: ArrayView1<f64>, atoms: &Array2<f64>, code: &Code) -> Array1<f64> {
    let mut r = x.to_owned();
    for &(j, c) in code {
        r.scaled_add(-c, &atoms.column(j));
    }
    r
}

/// Learns a `K`-atom dictionary from column-major patch vectors.
pub fn train_dictionary<R: Rng>(
    samples: &[Vec<f64>],
    patch_size: usize,
    cfg: &KsvdConfig,
    rng: &mut R,
) -> Result<Dictionary> {
    let dim = patch_size * patch_size;
    if cfg.atoms == 0 || cfg.iterations == 0 || cfg.sparsity == 0 {
        return Err(Error::InvalidConfig("K-SVD needs atoms, iterations and sparsity of at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::DegenerateSamples);
    }
    if let Some(s) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::ShapeMismatch {
            expected: (dim, 1),
            actual: (s.len(), 1),
        });
    }
    let w = samples.len();
    let x = Array2::from_shape_fn((dim, w), |(i, j)| samples[j][i]);
    let norms: Vec<f64> = x.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    let nonzero: Vec<usize> = (0..w).filter(|&j| norms[j] > 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::DegenerateSamples);
    }

    // Initial atoms: distinct nonzero samples when there are enough,
    // otherwise drawn with replacement.
    let k = cfg.atoms;
    let picks: Vec<usize> = if nonzero.len() >= k {
        rand::seq::index::sample(rng, nonzero.len(), k)
            .into_iter()
            .map(|i| nonzero[i])
            .collect()
    } else {
        (0..k).map(|_| nonzero[rng.gen_range(0..nonzero.len())]).collect()
    };
    let mut atoms = Array2::<f64>::zeros((dim, k));
    for (a, &s) in picks.iter().enumerate() {
        atoms.column_mut(a).assign(&(&x.column(s) / norms[s]));
    }

    let mut codes: Vec<Code> = vec![Vec::new(); w];
    let mut resid = x.clone();
    let mut meta = TrainingMeta {
        samples: w,
        ..TrainingMeta::default()
    };
    let total = (dim * w) as f64;

    for iter in 0..cfg.iterations {
        // Coding stage.
        let gram = atoms.t().dot(&atoms);
        let dtx = atoms.t().dot(&x);
        let first = iter == 0;
        let updates: Vec<(Code, Array1<f64>)> = (0..w)
            .into_par_iter()
            .map(|j| {
                let fresh = batch_omp(&gram, dtx.column(j), cfg.sparsity);
                let fresh_r = residual_of(x.column(j), &atoms, &fresh);
                if first {
                    return (fresh, fresh_r);
                }
                let old_r = resid.column(j);
                if fresh_r.dot(&fresh_r) <= old_r.dot(&old_r) {
                    (fresh, fresh_r)
                } else {
                    (codes[j].clone(), old_r.to_owned())
                }
            })
            .collect();
        for (j, (code, r)) in updates.into_iter().enumerate() {
            codes[j] = code;
            resid.column_mut(j).assign(&r);
        }

        // Which samples use which atom, and where in their code.
        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
        for (j, code) in codes.iter().enumerate() {
            for (pos, &(a, _)) in code.iter().enumerate() {
                users[a].push((j, pos));
            }
        }

        // Unused atoms are re-seeded from the worst-reconstructed samples.
        let mut worst: Vec<usize> = (0..w).collect();
        let err_of: Vec<f64> = resid.columns().into_iter().map(|c| c.dot(&c)).collect();
        worst.sort_by(|&a, &b| err_of[b].total_cmp(&err_of[a]).then(a.cmp(&b)));
        let mut worst = worst.into_iter().filter(|&j| norms[j] > 0.0);

        for a in 0..k {
            if users[a].is_empty() {
                if let Some(j) = worst.next() {
                    let v = &x.column(j) / norms[j];
                    atoms.column_mut(a).assign(&v);
                }
                continue;
            }
            let cols: Vec<usize> = users[a].iter().map(|&(j, _)| j).collect();
            let atom = atoms.column(a).to_owned();
            // Residual without this atom's contribution, restricted to its users.
            let mut e = Array2::<f64>::zeros((dim, cols.len()));
            for (c, &(j, pos)) in users[a].iter().enumerate() {
                let g = codes[j][pos].1;
                let mut col = e.column_mut(c);
                col.assign(&resid.column(j));
                col.scaled_add(g, &atom);
            }
            let (u, v) = rank_one(&e, atom);
            atoms.column_mut(a).assign(&u);
            for (c, &(j, pos)) in users[a].iter().enumerate() {
                codes[j][pos].1 = v[c];
                let mut r = resid.column_mut(j);
                r.assign(&e.column(c));
                r.scaled_add(-v[c], &u);
            }
        }

        let err = resid.iter().map(|v| v * v).sum::<f64>() / total;
        meta.errors.push(err);
        meta.iterations = iter + 1;
    }

    Ok(Dictionary {
        atoms,
        patch_size,
        meta,
    })
}

/// Leading singular pair of `e` by power iteration started at `start`.
/// Returns a unit left vector `u` and `v = e^T u`; every step can only
/// lower `||e - u v^T||`.
fn rank_one(e: &Array2<f64>, start: Array1<f64>) -> (Array1<f64>, Array1<f64>) {
    let mut u = start;
    let mut v = e.t().dot(&u);
    let mut sigma2 = v.dot(&v);
    if sigma2 == 0.0 {
        return (u, v);
    }
    for _ in 0..20 {
        let mut next = e.dot(&v);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            break;
        }
        next /= norm;
        let next_v = e.t().dot(&next);
        let next_sigma2 = next_v.dot(&next_v);
        if next_sigma2 < sigma2 {
            break;
        }
        let gain = next_sigma2 - sigma2;
        u = next;
        v = next_v;
        sigma2 = next_sigma2;
        if gain <= 1e-9 * sigma2 {
            break;
        }
    }
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparsity_rule() {
        assert_eq!(omp_sparsity(500), 10);
        assert_eq!(omp_sparsity(501), 11);
        assert_eq!(omp_sparsity(4), 1);
    }

    #[test]
    fn orthonormal_samples_are_represented_exactly() {
        // Standard basis of R^9 (3x3 patches).
        let samples: Vec<Vec<f64>> = (0..9)
            .map(|i| (0..9).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = KsvdConfig {
            atoms: 9,
            iterations: 3,
            sparsity: 1,
        };
        let d = train_dictionary(&samples, 3, &cfg, &mut rng).unwrap();
        assert!(d.meta.final_error().unwrap() <= 1e-9);
        for n in d.atom_norms() {
            assert!((n - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn single_sample_single_atom() {
        let s = vec![vec![1.0, 2.0, 0.0, -1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = KsvdConfig {
            atoms: 1,
            iterations: 2,
            sparsity: 1,
        };
        let d = train_dictionary(&s, 2, &cfg, &mut rng).unwrap();
        let norm = 6f64.sqrt();
        for (a, b) in d.atoms.column(0).iter().zip(&s[0]) {
            assert!((a - b / norm).abs() < 1e-12);
        }
        assert!(d.meta.final_error().unwrap() < 1e-20);
    }

    #[test]
    fn all_zero_samples_are_rejected() {
        let s = vec![vec![0.0; 4]; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = KsvdConfig {
            atoms: 2,
            iterations: 1,
            sparsity: 1,
        };
        assert!(matches!(
            train_dictionary(&s, 2, &cfg, &mut rng),
            Err(Error::DegenerateSamples)
        ));
    }

    #[test]
    fn error_sequence_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<Vec<f64>> = (0..200).map(|_| (0..16).map(|_| rng.gen::<f64>()).collect()).collect();
        let cfg = KsvdConfig {
            atoms: 12,
            iterations: 10,
            sparsity: 2,
        };
        let d = train_dictionary(&samples, 4, &cfg, &mut rng).unwrap();
        assert_eq!(d.meta.errors.len(), 10);
        for w in d.meta.errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", d.meta.errors);
        }
        for n in d.atom_norms() {
            assert!((n - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples: Vec<Vec<f64>> = (0..20).map(|_| (0..9).map(|_| rng.gen::<f64>()).collect()).collect();
        let cfg = KsvdConfig {
            atoms: 5,
            iterations: 2,
            sparsity: 1,
        };
        let d = train_dictionary(&samples, 3, &cfg, &mut rng).unwrap();
        let back = Dictionary::from_csv(&d.to_csv(), Path::new("d.csv")).unwrap();
        assert_eq!(back.atoms, d.atoms);
        assert_eq!(back.patch_size, 3);
    }
}
