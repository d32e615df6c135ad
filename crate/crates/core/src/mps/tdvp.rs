//! Two-site TDVP with cached environments.
//!
//! One step is a symmetric sweep: left→right with half the step, then
//! right→left with the other half. Each bond is evolved forward with the
//! projected two-site Hamiltonian, split by a truncated SVD, and the new
//! centre tensor is evolved backward with the one-site Hamiltonian before
//! moving on (skipped at the chain ends).

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::env::{single_site_blocks, two_site_blocks, update_left, update_right, Block, EffectiveHamiltonian};
use super::memory::memory_estimate;
use super::mpo::{build_mpo, MpoHamiltonian, PHYS_DIM};
use super::state::MpsState;
use super::tensor::{matmul, truncated_svd, view, Tensor3, ZERO};
use crate::error::{Error, Result};
use crate::krylov::expm_multiply;
use crate::model::{InteractionMatrix, LatticeSpec, QuenchParams};
use crate::observables::{ObservableMap, Snapshot};

pub const DEFAULT_K_MAX: usize = 50;
pub const KRYLOV_TOL: f64 = 1e-12;
pub const SVD_CUTOFF: f64 = 1e-12;
/// Default memory budget for a single run (bytes).
pub const DEFAULT_MEMORY_BUDGET: f64 = 40e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdvpConfig {
    pub max_chi: usize,
    pub k_max: usize,
    pub krylov_tol: f64,
    pub svd_cutoff: f64,
}

impl Default for TdvpConfig {
    fn default() -> Self {
        Self { max_chi: 64, k_max: DEFAULT_K_MAX, krylov_tol: KRYLOV_TOL, svd_cutoff: SVD_CUTOFF }
    }
}

impl TdvpConfig {
    pub fn with_max_chi(max_chi: usize) -> Self {
        Self { max_chi, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_chi == 0 {
            return Err(Error::param("max_chi", "must be at least 1"));
        }
        if self.k_max == 0 {
            return Err(Error::param("k_max", "must be at least 1"));
        }
        if !(self.krylov_tol > 0.0) || !(self.svd_cutoff >= 0.0) {
            return Err(Error::param("tolerance", "krylov_tol must be positive and svd_cutoff non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdvpStepRecord {
    pub step_index: usize,
    /// Wall time of the sweep alone, excluding measurements.
    pub wall_seconds: f64,
    pub max_chi_used: usize,
    pub truncation_weight_step: f64,
    /// ⟨H⟩ after the step (rad/s).
    pub energy: f64,
    pub lanczos_iters_max: usize,
    /// False if some local exponential missed the tolerance within `k_max`.
    pub lanczos_converged: bool,
}

/// Sweeping engine holding the precomputed MPO blocks and the environments.
pub struct Tdvp<'a> {
    mpo: &'a MpoHamiltonian,
    config: TdvpConfig,
    one_site: Vec<Vec<Block>>,
    two_site: Vec<Vec<Block>>,
    /// `lefts[k]` contracts sites `0..k`.
    lefts: Vec<Tensor3>,
    /// `rights[k]` contracts sites `k..N`.
    rights: Vec<Tensor3>,
    steps_done: usize,
}

struct SweepStats {
    iters_max: usize,
    converged: bool,
    discarded: f64,
}

impl SweepStats {
    fn absorb(&mut self, outcome: crate::krylov::KrylovOutcome) {
        self.iters_max = self.iters_max.max(outcome.iterations);
        self.converged &= outcome.converged;
    }
}

impl<'a> Tdvp<'a> {
    /// Brings `state` to canonical form with the centre on site 0 and builds
    /// all right environments.
    pub fn new(mpo: &'a MpoHamiltonian, state: &mut MpsState, config: TdvpConfig) -> Result<Self> {
        config.validate()?;
        let n = mpo.n_sites();
        if state.n_sites() != n {
            return Err(Error::param("state", format!("{} sites for a {n}-site MPO", state.n_sites())));
        }
        state.set_max_chi(config.max_chi);
        state.move_center(0);
        let one_site = (0..n).map(|k| single_site_blocks(mpo.entries(k))).collect();
        let two_site = (0..n.saturating_sub(1)).map(|k| two_site_blocks(mpo.entries(k), mpo.entries(k + 1))).collect();
        let mut engine = Self {
            mpo,
            config,
            one_site,
            two_site,
            lefts: vec![Tensor3::unit(); n + 1],
            rights: vec![Tensor3::unit(); n + 1],
            steps_done: 0,
        };
        for k in (1..n).rev() {
            engine.rights[k] = update_right(&engine.rights[k + 1], &state.tensors()[k], mpo.entries(k), mpo.bond_profile()[k]);
        }
        Ok(engine)
    }

    pub fn config(&self) -> &TdvpConfig {
        &self.config
    }

    /// ⟨H⟩ from the cached environments; the centre must be on site 0 (as it
    /// is between steps).
    pub fn energy(&self, state: &MpsState) -> f64 {
        assert_eq!(state.center(), 0, "energy needs the centre on site 0");
        let t = &state.tensors()[0];
        let heff = EffectiveHamiltonian { left: &self.lefts[0], right: &self.rights[1], blocks: &self.one_site[0], dims: t.dims() };
        let mut out = vec![ZERO; t.data().len()];
        heff.apply(t.data(), &mut out);
        let num: f64 = t.data().iter().zip(&out).map(|(a, b)| (a.conj() * b).re).sum();
        num / t.norm_sqr()
    }

    /// One symmetric sweep advancing the state by `dt` seconds.
    pub fn step(&mut self, state: &mut MpsState, dt: f64) -> TdvpStepRecord {
        let start = Instant::now();
        let stats = self.sweep(state, dt);
        let wall_seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
        self.steps_done += 1;
        state.add_truncation(stats.discarded);
        TdvpStepRecord {
            step_index: self.steps_done,
            wall_seconds,
            max_chi_used: state.max_bond(),
            truncation_weight_step: stats.discarded,
            energy: self.energy(state),
            lanczos_iters_max: stats.iters_max,
            lanczos_converged: stats.converged,
        }
    }

    fn sweep(&mut self, state: &mut MpsState, dt: f64) -> SweepStats {
        let n = state.n_sites();
        let tau = dt / 2.0;
        let mut stats = SweepStats { iters_max: 0, converged: true, discarded: 0.0 };
        if n == 1 {
            let outcome = self.evolve_one(state, 0, dt);
            stats.absorb(outcome);
            return stats;
        }
        debug_assert_eq!(state.center(), 0);
        for k in 0..n - 1 {
            let (outcome, discarded) = self.evolve_bond(state, k, tau, true);
            stats.absorb(outcome);
            stats.discarded += discarded;
            self.lefts[k + 1] = update_left(&self.lefts[k], &state.tensors()[k], self.mpo.entries(k), self.mpo.bond_profile()[k + 1]);
            if k + 1 < n - 1 {
                stats.absorb(self.evolve_one(state, k + 1, -tau));
            }
        }
        for k in (0..n - 1).rev() {
            let (outcome, discarded) = self.evolve_bond(state, k, tau, false);
            stats.absorb(outcome);
            stats.discarded += discarded;
            self.rights[k + 1] =
                update_right(&self.rights[k + 2], &state.tensors()[k + 1], self.mpo.entries(k + 1), self.mpo.bond_profile()[k + 1]);
            if k > 0 {
                stats.absorb(self.evolve_one(state, k, -tau));
            }
        }
        stats
    }

    fn evolve_one(&self, state: &mut MpsState, k: usize, tau: f64) -> crate::krylov::KrylovOutcome {
        let t = &state.tensors()[k];
        let dims = t.dims();
        let heff = EffectiveHamiltonian { left: &self.lefts[k], right: &self.rights[k + 1], blocks: &self.one_site[k], dims };
        let (v, outcome) = expm_multiply(|x, y| heff.apply(x, y), t.data(), tau, self.config.krylov_tol, self.config.k_max);
        state.tensors_mut()[k] = Tensor3::from_vec(dims, v);
        outcome
    }

    /// Evolves bond `(k, k+1)`; the centre moves to `k+1` if `rightward`,
    /// otherwise it ends on `k`.
    fn evolve_bond(&self, state: &mut MpsState, k: usize, tau: f64, rightward: bool) -> (crate::krylov::KrylovOutcome, f64) {
        let a = &state.tensors()[k];
        let b = &state.tensors()[k + 1];
        let [cl, d, mid] = a.dims();
        let cr = b.dims()[2];
        let theta = matmul(a.as_left_matrix(), view(b.data(), mid, d * cr));
        let dims = [cl, d * d, cr];
        let heff = EffectiveHamiltonian { left: &self.lefts[k], right: &self.rights[k + 2], blocks: &self.two_site[k], dims };
        let (theta, outcome) = expm_multiply(|x, y| heff.apply(x, y), &theta, tau, self.config.krylov_tol, self.config.k_max);

        let svd = truncated_svd(&theta, cl * d, d * cr, self.config.max_chi, self.config.svd_cutoff);
        let rank = svd.rank;
        let (mut u, mut vh) = (svd.u, svd.vh);
        if rightward {
            for (i, row) in vh.chunks_mut(d * cr).enumerate() {
                row.iter_mut().for_each(|x| *x *= svd.s[i]);
            }
        } else {
            for row in u.chunks_mut(rank) {
                row.iter_mut().zip(&svd.s).for_each(|(x, s)| *x *= *s);
            }
        }
        let tensors = state.tensors_mut();
        tensors[k] = Tensor3::from_vec([cl, d, rank], u);
        tensors[k + 1] = Tensor3::from_vec([rank, d, cr], vh);
        state.set_center(if rightward { k + 1 } else { k });
        (outcome, svd.discarded)
    }
}

/// One stand-alone step: rebuilds the environments, sweeps once and returns
/// the record. Long runs should keep a [`Tdvp`] alive instead.
pub fn tdvp_step(state: &mut MpsState, mpo: &MpoHamiltonian, dt: f64, max_chi: usize, k_max: usize) -> Result<TdvpStepRecord> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let config = TdvpConfig { max_chi, k_max, ..TdvpConfig::default() };
    let mut engine = Tdvp::new(mpo, state, config)?;
    Ok(engine.step(state, dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// All atoms in the ground state.
    Ground,
    /// Random state with saturated bonds, for timing at a fixed `max_chi`.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchOptions {
    pub tdvp: TdvpConfig,
    pub memory_budget_bytes: f64,
    pub initial: InitialState,
    /// Record occupation maps after every step. Timing-only runs switch this
    /// off.
    pub measure: bool,
}

impl Default for QuenchOptions {
    fn default() -> Self {
        Self { tdvp: TdvpConfig::default(), memory_budget_bytes: DEFAULT_MEMORY_BUDGET, initial: InitialState::Ground, measure: true }
    }
}

#[derive(Debug, Clone)]
pub struct QuenchRun {
    /// Snapshots at t = 0 and after every step (only t = 0 and the final
    /// time when measurements are off).
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<TdvpStepRecord>,
    pub final_state: MpsState,
    pub mpo_bond_profile: Vec<usize>,
}

impl QuenchRun {
    /// Mean wall time per step, the quantity fed to the cost fits.
    pub fn mean_step_seconds(&self) -> Option<f64> {
        (!self.records.is_empty()).then(|| self.records.iter().map(|r| r.wall_seconds).sum::<f64>() / self.records.len() as f64)
    }

    pub fn final_map(&self) -> &ObservableMap {
        &self.snapshots.last().expect("at least the initial snapshot").occupation
    }
}

fn snapshot(lattice: &LatticeSpec, state: &MpsState, time: f64, energy: f64) -> Snapshot {
    Snapshot { time, occupation: ObservableMap::from_sites(lattice, "n", time, &state.occupations()), energy }
}

/// Evolves for `params.t_pulse` in steps of `params.dt`.
///
/// Refuses to start if the memory model at `max_chi` exceeds the budget.
pub fn run_quench(lattice: &LatticeSpec, params: &QuenchParams, v: &InteractionMatrix, options: &QuenchOptions) -> Result<QuenchRun> {
    let n = lattice.n_sites();
    options.tdvp.validate()?;
    if !(params.dt.is_finite() && params.dt > 0.0) {
        return Err(Error::param("dt", format!("{} must be positive", params.dt)));
    }
    let required = memory_estimate(n, options.tdvp.max_chi, PHYS_DIM, 16, options.tdvp.k_max).total;
    if required > options.memory_budget_bytes {
        return Err(Error::MemoryBudgetExceeded { required_bytes: required, budget_bytes: options.memory_budget_bytes });
    }
    let mpo = build_mpo(lattice, params, v);
    let mut state = match options.initial {
        InitialState::Ground => MpsState::ground(n, options.tdvp.max_chi),
        InitialState::Random { seed } => MpsState::random(n, options.tdvp.max_chi, &mut ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut engine = Tdvp::new(&mpo, &mut state, options.tdvp)?;
    let n_steps = params.n_steps();
    let mut snapshots = vec![snapshot(lattice, &state, 0.0, engine.energy(&state))];
    let mut records = Vec::with_capacity(n_steps);
    for step in 1..=n_steps {
        let record = engine.step(&mut state, params.dt);
        let time = step as f64 * params.dt;
        if options.measure || step == n_steps {
            snapshots.push(snapshot(lattice, &state, time, record.energy));
        }
        records.push(record);
    }
    Ok(QuenchRun { snapshots, records, final_state: state, mpo_bond_profile: mpo.bond_profile().to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::tensor::C64;
    use crate::model::{default_interactions, reference_setup, DEFAULT_C6, DEFAULT_H_X, DEFAULT_OMEGA};
    use crate::oracle::{evolve_exact, OracleOptions};

    #[test]
    fn two_sites_are_exact() {
        let (l, p) = reference_setup(2, 1, DEFAULT_OMEGA, DEFAULT_H_X, DEFAULT_C6).unwrap();
        let v = default_interactions(&l, &p).unwrap();
        let mpo = build_mpo(&l, &p, &v);
        let mut state = MpsState::ground(2, 4);
        for dt in [1e-9, 7e-9] {
            let rec = tdvp_step(&mut state, &mpo, dt, 4, 50).unwrap();
            assert!(rec.lanczos_converged);
        }
        let exact = evolve_exact(&l, &p, &v, 8e-9, 8e-9, OracleOptions::default()).unwrap();
        let want = exact.final_state.amplitudes();
        let got = state.to_amplitudes();
        let phase = want.iter().zip(&got).map(|(w, g)| w.conj() * g).sum::<C64>();
        let phase = phase / phase.norm();
        for (w, g) in want.iter().zip(&got) {
            assert!((w * phase - g).norm() < 1e-10, "{w} vs {g}");
        }
    }

    #[test]
    fn undriven_ground_state_is_stationary() {
        let (l, p) = reference_setup(3, 2, DEFAULT_OMEGA, DEFAULT_H_X, DEFAULT_C6).unwrap();
        let p = p.without_drive();
        let v = default_interactions(&l, &p).unwrap();
        let mpo = build_mpo(&l, &p, &v);
        let mut state = MpsState::ground(6, 8);
        let rec = tdvp_step(&mut state, &mpo, 1e-9, 8, 50).unwrap();
        assert_eq!(rec.truncation_weight_step, 0.0);
        assert!(state.occupations().iter().all(|&x| x.abs() < 1e-14));
        assert!((state.to_amplitudes()[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_site_chain_evolves_exactly() {
        let (l, p) = reference_setup(1, 1, DEFAULT_OMEGA, DEFAULT_H_X, DEFAULT_C6).unwrap();
        let v = default_interactions(&l, &p).unwrap();
        let mpo = build_mpo(&l, &p, &v);
        let mut state = MpsState::ground(1, 2);
        tdvp_step(&mut state, &mpo, 5e-8, 2, 50).unwrap();
        let exact = evolve_exact(&l, &p, &v, 5e-8, 5e-8, OracleOptions::default()).unwrap();
        assert!((state.occupations()[0] - exact.final_state.occupations()[0]).abs() < 1e-10);
    }

    #[test]
    fn zero_pulse_gives_single_snapshot() {
        let (l, p) = reference_setup(2, 2, DEFAULT_OMEGA, DEFAULT_H_X, DEFAULT_C6).unwrap();
        let v = default_interactions(&l, &p).unwrap();
        let run = run_quench(&l, &p, &v, &QuenchOptions::default()).unwrap();
        assert_eq!(run.snapshots.len(), 1);
        assert!(run.records.is_empty());
        assert!(run.mean_step_seconds().is_none());
    }

    #[test]
    fn memory_budget_is_enforced() {
        let (l, p) = reference_setup(3, 3, DEFAULT_OMEGA, DEFAULT_H_X, DEFAULT_C6).unwrap();
        let v = default_interactions(&l, &p).unwrap();
        let options = QuenchOptions { memory_budget_bytes: 1e6, ..QuenchOptions::default() };
        assert!(matches!(run_quench(&l, &p, &v, &options), Err(Error::MemoryBudgetExceeded { .. })));
    }

    #[test]
    fn records_respect_caps() {
        let (l, p) = reference_setup(2, 3, DEFAULT_OMEGA, DEFAULT_H_X, DEFAULT_C6).unwrap();
        let p = p.with_timing(20e-9, 1e-9).unwrap();
        let v = default_interactions(&l, &p).unwrap();
        let options = QuenchOptions { tdvp: TdvpConfig::with_max_chi(4), ..QuenchOptions::default() };
        let run = run_quench(&l, &p, &v, &options).unwrap();
        assert_eq!(run.records.len(), 20);
        assert_eq!(run.snapshots.len(), 21);
        for r in &run.records {
            assert!(r.wall_seconds > 0.0);
            assert!(r.max_chi_used <= 4);
            assert!(r.lanczos_iters_max <= 50);
        }
        assert!(run.final_state.canonical_error() < 1e-10);
        assert!((run.final_state.norm() - 1.0).abs() < 1e-10);
    }
}
