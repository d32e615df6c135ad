//! Lawson–Hanson active-set non-negative least squares.

use nalgebra::{DMatrix, DVector};

const MAX_OUTER_ITERATIONS_FACTOR: usize = 30;

/// Minimises `|A x - b|` subject to `x >= 0`.
///
/// Columns are rescaled to unit norm internally, which keeps the active-set
/// tolerances meaningful when the basis functions differ by many orders of
/// magnitude.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "right-hand side length");
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut scaled = a.clone();
    for (j, &s) in norms.iter().enumerate() {
        if s > 0.0 {
            scaled.column_mut(j).scale_mut(1.0 / s);
        }
    }
    let y = solve_scaled(&scaled, b, &norms);
    DVector::from_iterator(n, (0..n).map(|j| if norms[j] > 0.0 { y[j] / norms[j] } else { 0.0 }))
}

fn least_squares_on(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(passive);
    let svd = sub.svd(true, true);
    svd.solve(b, 1e-14).expect("SVD with both factors")
}

fn solve_scaled(a: &DMatrix<f64>, b: &DVector<f64>, norms: &[f64]) -> DVector<f64> {
    let n = a.ncols();
    let tol = 1e-12 * b.norm().max(f64::MIN_POSITIVE);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let usable: Vec<bool> = norms.iter().map(|&s| s > 0.0).collect();

    for _ in 0..MAX_OUTER_ITERATIONS_FACTOR * n.max(1) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && usable[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j_new) = candidate else { break };
        passive[j_new] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z_sub = least_squares_on(a, b, &idx);
            if z_sub.iter().all(|&z| z > 0.0) {
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z_sub[k];
                }
                break;
            }
            // step back towards the feasible region
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z_sub[k] <= 0.0 {
                    let denom = x[j] - z_sub[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z_sub[k] - x[j]);
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}
