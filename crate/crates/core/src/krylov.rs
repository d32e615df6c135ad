//! Lanczos approximation of `exp(-i tau A) v` for Hermitian `A` that is only
//! available through its action on vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOutcome {
    /// Number of operator applications.
    pub iterations: usize,
    pub converged: bool,
    /// A-posteriori estimate of the error norm, relative to `|v|`.
    pub error_estimate: f64,
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `exp(-i tau T) e_1` for the real symmetric tridiagonal `T`.
fn tridiagonal_exp_first_column(alphas: &[f64], betas: &[f64], tau: f64) -> Vec<Complex64> {
    let m = alphas.len();
    if m == 1 {
        return vec![Complex64::from_polar(1.0, -tau * alphas[0])];
    }
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let q = &eig.eigenvectors;
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &lambda)| Complex64::from_polar(q[(0, k)], -tau * lambda))
        .collect();
    (0..m)
        .map(|i| (0..m).map(|k| phases[k] * q[(i, k)]).sum())
        .collect()
}

/// Applies `exp(-i tau A)` to `v` with a Lanczos basis of at most `k_max`
/// vectors, stopping once the estimated error drops below `tol · |v|`.
///
/// The basis is fully reorthogonalised. If the tolerance is not met within
/// `k_max` vectors the best available approximation is returned with
/// `converged == false`.
pub fn expm_multiply<F>(mut apply: F, v: &[Complex64], tau: f64, tol: f64, k_max: usize) -> (Vec<Complex64>, KrylovOutcome)
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let n = v.len();
    let beta0 = norm(v);
    if beta0 == 0.0 || tau == 0.0 {
        return (v.to_vec(), KrylovOutcome { iterations: 0, converged: true, error_estimate: 0.0 });
    }
    let k_max = k_max.max(1).min(n.max(1));
    let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|x| x / beta0).collect()];
    let mut alphas = Vec::with_capacity(k_max);
    let mut betas: Vec<f64> = Vec::with_capacity(k_max);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut scale = 0.0f64;

    loop {
        let j = alphas.len();
        apply(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w).re;
        alphas.push(alpha);
        scale = scale.max(alpha.abs());
        axpy(Complex64::new(-alpha, 0.0), &basis[j], &mut w);
        if j > 0 {
            axpy(Complex64::new(-betas[j - 1], 0.0), &basis[j - 1], &mut w);
        }
        for q in &basis {
            let overlap = dot(q, &w);
            axpy(-overlap, q, &mut w);
        }
        let beta = norm(&w);
        scale = scale.max(beta);

        let coeffs = tridiagonal_exp_first_column(&alphas, &betas, tau);
        // residual-based estimate; the factor tau keeps it dimensionless
        let error_estimate = tau.abs() * beta * coeffs[j].norm();
        let exhausted = beta <= 1e-14 * scale.max(f64::MIN_POSITIVE) || j + 1 == n;
        let converged = exhausted || error_estimate < tol;
        if converged || j + 1 >= k_max {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (q, c) in basis.iter().zip(&coeffs) {
                axpy(c * beta0, q, &mut out);
            }
            let outcome = KrylovOutcome {
                iterations: j + 1,
                converged,
                error_estimate: if exhausted { 0.0 } else { error_estimate },
            };
            return (out, outcome);
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
}
