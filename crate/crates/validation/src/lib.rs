//! Synthetic timing data with known scaling laws, used to check that the
//! fitters recover what went in.

use quench_core::costfit::RuntimeSample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `t = a + b N^1.5 chi^3 + c N^2 chi^2`.
pub fn mps_law(a: f64, b: f64, c: f64, n: usize, chi: usize) -> f64 {
    let (n, chi) = (n as f64, chi as f64);
    a + b * n.powf(1.5) * chi.powi(3) + c * n * n * chi * chi
}

/// `t = a N + b N^2 + c N^3`.
pub fn nqs_law(a: f64, b: f64, c: f64, n: usize) -> f64 {
    let n = n as f64;
    a * n + b * n * n + c * n * n * n
}

/// Multiplies every time by `1 + noise * z`, `z` standard normal, clamped
/// away from zero.
pub struct Noise {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    level: f64,
}

impl Noise {
    pub fn new(level: f64, seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), normal: Normal::new(0.0, 1.0).expect("unit normal"), level }
    }

    pub fn apply(&mut self, t: f64) -> f64 {
        t * (1.0 + self.level * self.normal.sample(&mut self.rng)).max(0.05)
    }
}

/// Every `(n, chi)` pair repeated `replicates` times.
pub fn mps_samples(coeffs: (f64, f64, f64), ns: &[usize], chis: &[usize], replicates: usize, noise: &mut Noise) -> Vec<RuntimeSample> {
    let (a, b, c) = coeffs;
    let mut out = Vec::new();
    for _ in 0..replicates {
        for &n in ns {
            for &chi in chis {
                out.push(RuntimeSample {
                    n,
                    chi,
                    dt_ns: 1.0,
                    seconds_per_step: noise.apply(mps_law(a, b, c, n, chi)),
                    hardware_tag: "synthetic".into(),
                    n_workers: 1,
                });
            }
        }
    }
    out
}

/// NQS samples (`chi = 0`) split over `n_workers` devices: the recorded time
/// is the device-seconds divided by the worker count.
pub fn nqs_samples(coeffs: (f64, f64, f64), ns: &[usize], n_workers: usize, noise: &mut Noise) -> Vec<RuntimeSample> {
    let (a, b, c) = coeffs;
    ns.iter()
        .map(|&n| RuntimeSample {
            n,
            chi: 0,
            dt_ns: 1.0,
            seconds_per_step: noise.apply(nqs_law(a, b, c, n)) / n_workers as f64,
            hardware_tag: "synthetic".into(),
            n_workers,
        })
        .collect()
}

/// `count` geometrically spaced integers from `lo` to `hi` (duplicates
/// removed).
pub fn geometric_grid(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (l, h) = ((lo as f64).ln(), (hi as f64).ln());
    let mut v: Vec<usize> = (0..count)
        .map(|i| (l + (h - l) * i as f64 / (count.max(2) - 1) as f64).exp().round() as usize)
        .collect();
    v.dedup();
    v
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}
