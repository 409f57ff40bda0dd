//! l1-regularized least squares by cyclic coordinate descent with an
//! active-set refinement.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1, ArrayView2};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub coefficients: Array1<f64>,
    /// `||x - A b||^2 + lambda * ||b||_1` at the returned coefficients.
    pub objective: f64,
    /// Coefficients with magnitude above 1e-12.
    pub nnz: usize,
    pub iterations: usize,
}

pub fn lasso_objective(x: ArrayView1<f64>, a: ArrayView2<f64>, coef: ArrayView1<f64>, lambda: f64) -> f64 {
    let r = &x - &a.dot(&coef);
    r.dot(&r) + lambda * coef.iter().map(|c| c.abs()).sum::<f64>()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Minimizes `||x - A b||^2 + lambda * ||b||_1` over `b`.
///
/// Sweeps coordinates in order until the largest coefficient change in a
/// sweep drops below `tol` or `max_iters` sweeps have run. Zero columns keep
/// a zero coefficient. Coordinate descent crawls when atoms are strongly
/// correlated, so the result is then refined by solving the stationarity
/// equations on the current support and sign pattern, followed by another
/// round of sweeps, for as long as that lowers the objective.
pub fn sparse_code(x: ArrayView1<f64>, a: ArrayView2<f64>, lambda: f64, max_iters: usize, tol: f64) -> SparseCode {
    let k = a.ncols();
    let col_sq: Vec<f64> = a.columns().into_iter().map(|c| c.dot(&c)).collect();
    let mut coef = Array1::<f64>::zeros(k);
    let mut resid = x.to_owned();
    let mut iterations = sweeps(a, &col_sq, &mut coef, &mut resid, lambda, max_iters, tol);
    let mut objective = lasso_objective(x, a, coef.view(), lambda);
    for _ in 0..=k {
        let Some(refined) = solve_on_support(x, a, &coef, lambda) else {
            break;
        };
        let refined_obj = lasso_objective(x, a, refined.view(), lambda);
        if !(refined_obj < objective) {
            break;
        }
        coef = refined;
        resid = &x - &a.dot(&coef);
        iterations += sweeps(a, &col_sq, &mut coef, &mut resid, lambda, max_iters, tol);
        objective = lasso_objective(x, a, coef.view(), lambda);
    }
    let nnz = coef.iter().filter(|c| c.abs() > 1e-12).count();
    SparseCode {
        coefficients: coef,
        objective,
        nnz,
        iterations,
    }
}

fn sweeps(
    a: ArrayView2<f64>,
    col_sq: &[f64],
    coef: &mut Array1<f64>,
    resid: &mut Array1<f64>,
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> usize {
    let half_lambda = lambda / 2.0;
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..coef.len() {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = a.column(j);
            let old = coef[j];
            let rho = col.dot(&*resid) + col_sq[j] * old;
            let new = soft_threshold(rho, half_lambda) / col_sq[j];
            let delta = new - old;
            if delta != 0.0 {
                resid.scaled_add(-delta, &col);
                coef[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            break;
        }
    }
    iterations
}

/// Exact minimizer over the face of the orthant picked out by the nonzero
/// coefficients of `coef`. When that system is singular or a sign flips,
/// the optimum lies on a smaller support, so every support with one
/// coefficient dropped is tried and the best is returned.
fn solve_on_support(x: ArrayView1<f64>, a: ArrayView2<f64>, coef: &Array1<f64>, lambda: f64) -> Option<Array1<f64>> {
    let support: Vec<usize> = (0..coef.len()).filter(|&j| coef[j] != 0.0).collect();
    if let Some(b) = face_minimizer(x, a, coef, &support, lambda) {
        return Some(b);
    }
    (0..support.len())
        .filter_map(|skip| {
            let smaller: Vec<usize> = support.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &j)| j).collect();
            face_minimizer(x, a, coef, &smaller, lambda)
        })
        .map(|b| (lasso_objective(x, a, b.view(), lambda), b))
        .min_by(|l, r| l.0.total_cmp(&r.0))
        .map(|(_, b)| b)
}

/// Solves `A_S^T A_S b = A_S^T x - lambda s / 2` with the signs `s` of
/// `coef`. `None` for an empty or singular support or a flipped sign.
fn face_minimizer(
    x: ArrayView1<f64>,
    a: ArrayView2<f64>,
    coef: &Array1<f64>,
    support: &[usize],
    lambda: f64,
) -> Option<Array1<f64>> {
    if support.is_empty() {
        return None;
    }
    let s = support.len();
    let gram = DMatrix::from_fn(s, s, |i, j| a.column(support[i]).dot(&a.column(support[j])));
    let rhs = DVector::from_fn(s, |i, _| {
        a.column(support[i]).dot(&x) - lambda * coef[support[i]].signum() / 2.0
    });
    let sol = gram.cholesky()?.solve(&rhs);
    let mut out = Array1::zeros(coef.len());
    for (i, &j) in support.iter().enumerate() {
        if !(sol[i] * coef[j] > 0.0) {
            return None;
        }
        out[j] = sol[i];
    }
    Some(out)
}
