use quench_core::model::{default_interactions, reference_setup, DEFAULT_C6, DEFAULT_H_X, DEFAULT_OMEGA};
use quench_core::mps::{run_quench, InitialState, QuenchOptions, TdvpConfig};
use quench_core::oracle::{evolve_exact, OracleOptions};

#[test]
fn accuracy_improves_with_bond_dimension() {
    let (l, p) = reference_setup(3, 3, DEFAULT_OMEGA, DEFAULT_H_X, DEFAULT_C6).unwrap();
    let p = p.with_timing(300e-9, 1e-9).unwrap();
    let v = default_interactions(&l, &p).unwrap();
    let exact = evolve_exact(&l, &p, &v, p.t_pulse, p.dt, OracleOptions::default()).unwrap();
    let mut previous = f64::INFINITY;
    for chi in [2usize, 4, 8, 16, 32] {
        let run = run_quench(&l, &p, &v, &QuenchOptions { tdvp: TdvpConfig::with_max_chi(chi), ..Default::default() }).unwrap();
        let err = exact
            .snapshots
            .iter()
            .zip(&run.snapshots)
            .map(|(a, b)| a.occupation.max_abs_diff(&b.occupation))
            .fold(0.0, f64::max);
        assert!(err <= previous + 1e-6, "chi={chi}: {err} > {previous}");
        assert!(run.records.iter().all(|r| r.max_chi_used <= chi));
        previous = err;
    }
    assert!(previous < 1e-3);
}

fn seconds_per_step(l: usize, chi: usize) -> f64 {
    let (lat, p) = reference_setup(l, l, DEFAULT_OMEGA, DEFAULT_H_X, DEFAULT_C6).unwrap();
    let p = p.with_timing(2e-9, 1e-9).unwrap();
    let v = default_interactions(&lat, &p).unwrap();
    let options = QuenchOptions {
        tdvp: TdvpConfig::with_max_chi(chi),
        initial: InitialState::Random { seed: 3 },
        measure: false,
        ..Default::default()
    };
    run_quench(&lat, &p, &v, &options).unwrap().mean_step_seconds().unwrap()
}

#[test]
fn step_time_grows_between_quadratically_and_cubically_in_chi() {
    let (lo, hi) = (16usize, 64usize);
    let slope = (seconds_per_step(5, hi) / seconds_per_step(5, lo)).ln() / (hi as f64 / lo as f64).ln();
    assert!((1.8..=3.2).contains(&slope), "slope {slope}");
}
