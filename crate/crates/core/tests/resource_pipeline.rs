use proptest::prelude::*;
use quench_core::budget::{qpu_schedule, QpuSettings};
use quench_core::costfit::{crossover, extrapolate, fit_mps, fit_nqs, CostModel, FitOptions, RuntimeSample};
use quench_core::register::{simulate_defect_free, DefectProbabilities, TrapLayout};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn defect_free_sweep_matches_product_formula() {
    let probs = DefectProbabilities::MEASURED;
    let mut last = 1.0;
    for n in [30, 50, 70, 90] {
        let layout = TrapLayout::grid_with_central_register(20, 10, n, 5.0).unwrap();
        let est = simulate_defect_free(&layout, &probs, 0.5, 10_000, 99).unwrap();
        let analytic = est.analytic_reference(&layout, 0.5, &probs).unwrap();
        assert!((est.p_hat - analytic).abs() <= 3.0 * est.std_err, "N={n}: {} vs {analytic}", est.p_hat);
        assert!(est.p_hat < last);
        last = est.p_hat;
    }
}

#[test]
fn qpu_rows_for_the_smaller_registers() {
    let s = QpuSettings::default();
    for (n, hours, kwh) in [(225, 6.3, 20.0), (400, 48.3, 156.0)] {
        let q = qpu_schedule(n, &s).unwrap();
        let h = q.budget.wall_seconds / 3600.0;
        assert!((h / hours - 1.0).abs() <= 0.25, "{n}: {h} h");
        assert!((q.energy_kwh / kwh - 1.0).abs() <= 0.25, "{n}: {} kWh", q.energy_kwh);
        assert!((q.energy_kwh - 3.2 * h).abs() < 1e-9 * q.energy_kwh);
    }
}

fn noisy(t: f64, noise: f64, rng: &mut ChaCha8Rng) -> f64 {
    t * (1.0 + noise * Normal::new(0.0, 1.0).unwrap().sample(rng)).max(0.05)
}

fn mps_samples(a: f64, b: f64, c: f64, seed: u64) -> Vec<RuntimeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..5 {
        for n in [25usize, 64, 144] {
            for chi in [100usize, 600] {
                let (nf, cf) = (n as f64, chi as f64);
                let t = a + b * nf.powf(1.5) * cf.powi(3) + c * nf * nf * cf * cf;
                out.push(RuntimeSample { n, chi, dt_ns: 1.0, seconds_per_step: noisy(t, 0.05, &mut rng), hardware_tag: "syn".into(), n_workers: 1 });
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mps_coefficients_come_back(seed in 0u64..10_000) {
        let (a, b, c) = (0.125, 1e-10, 3e-9);
        let m = fit_mps(&mps_samples(a, b, c, seed), &FitOptions::default()).unwrap();
        prop_assert!((m.a / a - 1.0).abs() < 0.15);
        prop_assert!((m.b / b - 1.0).abs() < 0.15);
        prop_assert!((m.c / c - 1.0).abs() < 0.15);
    }

    #[test]
    fn noiseless_nqs_fit_is_worker_invariant(workers in 1usize..16) {
        let ns = [4usize, 10, 30, 100, 300, 1000, 3000, 10_000];
        let law = |n: usize| { let x = n as f64; 1e-2 * x + 1e-4 * x * x + 1e-7 * x * x * x };
        let samples: Vec<RuntimeSample> = ns.iter().map(|&n| RuntimeSample {
            n, chi: 0, dt_ns: 1.0, seconds_per_step: law(n) / workers as f64, hardware_tag: "gpu".into(), n_workers: workers,
        }).collect();
        let q = fit_nqs(&samples, &FitOptions::default()).unwrap();
        prop_assert!((q.c_q / 1e-7 - 1.0).abs() < 1e-6);
        prop_assert!((q.a_q / 1e-2 - 1.0).abs() < 1e-6);
    }
}

#[test]
fn crossover_is_stable_under_refinement() {
    let model = CostModel::Mps(fit_mps(&mps_samples(1e-3, 1e-9, 1e-8, 5), &FitOptions::default()).unwrap());
    let qpu = QpuSettings::default();
    let classical = |n: usize| {
        let chi = 1000.min(1usize << (n / 2).min(20));
        extrapolate(&model, n, chi, 4e-6, 1e-9, 400.0).map(|r| (r.total_seconds, r.energy_kwh))
    };
    let quantum = |n: usize| qpu_schedule(n, &qpu).map(|s| (s.budget.wall_seconds, s.energy_kwh));
    let coarse: Vec<usize> = (4..=400).step_by(4).collect();
    let fine: Vec<usize> = (4..=400).step_by(2).collect();
    let a = crossover(&coarse, classical, quantum).unwrap();
    let b = crossover(&fine, classical, quantum).unwrap();
    let (ta, tb) = (a.n_time.unwrap(), b.n_time.unwrap());
    assert!((ta - tb).abs() <= 4.0, "{ta} vs {tb}");
    assert!(a.n_energy.is_some() && b.n_energy.is_some());
}
