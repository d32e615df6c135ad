use quench_core::convergence::{d8_error, energy_drift};
use quench_core::model::{default_interactions, reference_setup, DEFAULT_C6, DEFAULT_H_X, DEFAULT_OMEGA};
use quench_core::oracle::{evolve_exact, ExactTrajectory, OracleOptions};
use quench_core::symmetry::Symmetry;

fn run(lx: usize, ly: usize, c6: f64, t: f64) -> (ExactTrajectory, f64) {
    let (l, p) = reference_setup(lx, ly, DEFAULT_OMEGA, DEFAULT_H_X, c6).unwrap();
    let v = default_interactions(&l, &p).unwrap();
    let traj = evolve_exact(&l, &p, &v, t, 1e-9, OracleOptions::default()).unwrap();
    (traj, p.energy_scale(l.n_sites()))
}

#[test]
fn energy_is_conserved() {
    let (traj, e_scale) = run(3, 3, DEFAULT_C6, 400e-9);
    let energies: Vec<f64> = traj.snapshots.iter().map(|s| s.energy).collect();
    assert_eq!(energies[0], 0.0);
    let drift = energy_drift(&energies, e_scale).unwrap();
    assert!(drift < 1e-8, "drift {drift}");
}

#[test]
fn occupation_maps_keep_the_lattice_symmetry() {
    let (traj, _) = run(3, 3, DEFAULT_C6, 200e-9);
    for s in &traj.snapshots {
        for &g in Symmetry::group(3, 3) {
            assert!(s.occupation.max_abs_diff(&s.occupation.transformed(g)) < 1e-10);
        }
    }
    assert!(d8_error(&traj.snapshots.last().unwrap().occupation) < 1e-8);

    let (traj, _) = run(4, 2, DEFAULT_C6, 100e-9);
    let last = &traj.snapshots.last().unwrap().occupation;
    assert!(d8_error(last) < 1e-8);
}

#[test]
fn dynamics_do_not_depend_on_c6() {
    // the spacing follows c6, so every coupling ratio is unchanged
    let (a, _) = run(3, 2, DEFAULT_C6, 100e-9);
    let (b, _) = run(3, 2, 3.7 * DEFAULT_C6, 100e-9);
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert!(x.occupation.max_abs_diff(&y.occupation) < 1e-9);
        assert!((x.energy - y.energy).abs() < 1e-6 * DEFAULT_OMEGA);
    }
}
