//! Closed-form memory model for a two-site TDVP run.

use serde::{Deserialize, Serialize};

/// Byte counts of the individual contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryBreakdown {
    /// Site tensors: `s d chi^2 N`.
    pub mps: f64,
    /// Left and right environments, trapezoid area under the MPO bond
    /// profile: `s chi^2 (3 N^1.5 - 7 N - 12 N^0.5 - 4)`, clamped at zero.
    pub baths: f64,
    /// Lanczos basis: `k s d chi^2`.
    pub krylov: f64,
    /// Contraction intermediates: `3 s h d^2 chi^2` with `h = 3 sqrt(N) + 2`.
    pub intermediate: f64,
    pub total: f64,
    /// Leading-order approximation `3 s chi^2 N^1.5`.
    pub leading: f64,
}

pub const DEFAULT_SCALAR_BYTES: usize = 16;
pub const DEFAULT_PHYS_DIM: usize = 2;

pub fn memory_estimate(n: usize, chi: usize, d: usize, s: usize, k: usize) -> MemoryBreakdown {
    let (n, chi, d, s, k) = (n as f64, chi as f64, d as f64, s as f64, k as f64);
    let chi2 = chi * chi;
    let sqrt_n = n.sqrt();
    let mps = s * d * chi2 * n;
    let baths = s * chi2 * (3.0 * n * sqrt_n - 7.0 * n - 12.0 * sqrt_n - 4.0).max(0.0);
    let krylov = k * s * d * chi2;
    let h = 3.0 * sqrt_n + 2.0;
    let intermediate = 3.0 * s * h * d * d * chi2;
    MemoryBreakdown {
        mps,
        baths,
        krylov,
        intermediate,
        total: mps + baths + krylov + intermediate,
        leading: 3.0 * s * chi2 * n * sqrt_n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plug_in_values() {
        let m = memory_estimate(1, 1, 2, 16, 50);
        assert_eq!(m.mps, 32.0);
        assert_eq!(m.krylov, 1600.0);
        assert_eq!(m.baths, 0.0);
    }

    #[test]
    fn leading_term_for_large_register() {
        let m = memory_estimate(225, 1000, 2, 16, 50);
        assert!((m.leading - 1.62e11).abs() < 1e6);
        assert!(m.total > m.baths && m.baths > 0.8 * m.leading);
    }

    proptest! {
        #[test]
        fn every_term_scales_with_chi_squared(n in 1usize..500, chi in 1usize..4000) {
            let a = memory_estimate(n, chi, 2, 16, 50);
            let b = memory_estimate(n, 2 * chi, 2, 16, 50);
            for (x, y) in [(a.mps, b.mps), (a.baths, b.baths), (a.krylov, b.krylov), (a.intermediate, b.intermediate), (a.total, b.total)] {
                prop_assert!((y - 4.0 * x).abs() <= 1e-9 * y.abs().max(1.0));
            }
        }
    }
}
