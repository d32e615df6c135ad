//! Exact state-vector evolution for small lattices.
//!
//! Basis state `b` has site `k` (snake order) in the Rydberg state iff bit
//! `k` of `b` is set. The Hamiltonian is never stored as a matrix: its
//! diagonal is precomputed and the drive term is applied by bit flips.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{self, expm_multiply};
use crate::model::{steps_for, InteractionMatrix, LatticeSpec, QuenchParams};
use crate::observables::{ObservableMap, Snapshot};

pub const DENSE_SITE_LIMIT: usize = 16;
pub const LARGE_SITE_LIMIT: usize = 20;

/// Krylov error target per step.
const STEP_TOL: f64 = 1e-12;
const STEP_KRYLOV_DIM: usize = 60;
const MAX_STEP_SPLITS: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_sites: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// The all-ground product state |00…0⟩.
    pub fn ground(n_sites: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_sites];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { n_sites, amplitudes }
    }

    pub fn from_amplitudes(n_sites: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1 << n_sites {
            return Err(Error::param("amplitudes", format!("expected length {}, got {}", 1usize << n_sites, amplitudes.len())));
        }
        Ok(Self { n_sites, amplitudes })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        krylov::norm(&self.amplitudes)
    }

    /// ⟨n_k⟩ for every site.
    pub fn occupations(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.n_sites];
        for (b, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut bits = b;
            while bits != 0 {
                let k = bits.trailing_zeros() as usize;
                occ[k] += p;
                bits &= bits - 1;
            }
        }
        occ
    }
}

/// ⟨σ^z_i σ^z_j⟩, with σ^z = +1 on the Rydberg state.
pub fn two_point(state: &StateVector, i: usize, j: usize) -> Result<f64> {
    let n = state.n_sites();
    for site in [i, j] {
        if site >= n {
            return Err(Error::InvalidSite { site, n_sites: n });
        }
    }
    let mask = (1usize << i) | (1usize << j);
    let mut acc = 0.0;
    for (b, a) in state.amplitudes.iter().enumerate() {
        let parity = if i == j { 0 } else { (b & mask).count_ones() % 2 };
        let sign = if parity == 0 { 1.0 } else { -1.0 };
        acc += sign * a.norm_sqr();
    }
    Ok(acc)
}

/// Matrix-free Rydberg Hamiltonian on the full 2^N space.
#[derive(Debug, Clone)]
pub struct SpinHamiltonian {
    n_sites: usize,
    diagonal: Vec<f64>,
    half_omega: f64,
}

impl SpinHamiltonian {
    pub fn new(params: &QuenchParams, v: &InteractionMatrix) -> Self {
        let n = v.n_sites();
        let dim = 1usize << n;
        let pairs: Vec<_> = v.pairs().collect();
        let diagonal = (0..dim)
            .map(|b| {
                let occupied = |k: usize| (b >> k) & 1 == 1;
                let interaction: f64 = pairs
                    .iter()
                    .filter(|&&(i, j, _)| occupied(i) && occupied(j))
                    .map(|&(_, _, vij)| vij)
                    .sum();
                interaction - params.delta * b.count_ones() as f64
            })
            .collect();
        Self { n_sites: n, diagonal, half_omega: params.omega / 2.0 }
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (b, yb) in y.iter_mut().enumerate() {
            let mut acc = x[b] * self.diagonal[b];
            if self.half_omega != 0.0 {
                let mut flips = Complex64::new(0.0, 0.0);
                for k in 0..self.n_sites {
                    flips += x[b ^ (1 << k)];
                }
                acc += flips * self.half_omega;
            }
            *yb = acc;
        }
    }

    pub fn expectation(&self, state: &StateVector) -> f64 {
        let mut hx = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply(state.amplitudes(), &mut hx);
        krylov::dot(state.amplitudes(), &hx).re
    }

    /// Applies exp(-i H dt), halving the step when the Krylov basis cannot
    /// reach the tolerance (at most a few times; the last attempt is kept).
    pub fn propagate(&self, state: &mut StateVector, dt: f64) {
        self.propagate_split(state, dt, 0);
    }

    fn propagate_split(&self, state: &mut StateVector, dt: f64, depth: u32) {
        let (next, info) = expm_multiply(|x, y| self.apply(x, y), &state.amplitudes, dt, STEP_TOL, STEP_KRYLOV_DIM);
        if info.converged || depth >= MAX_STEP_SPLITS {
            state.amplitudes = next;
        } else {
            self.propagate_split(state, dt / 2.0, depth + 1);
            self.propagate_split(state, dt / 2.0, depth + 1);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Raise the site limit from 16 to 20.
    pub allow_large: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { allow_large: false }
    }
}

impl OracleOptions {
    pub fn site_limit(&self) -> usize {
        if self.allow_large {
            LARGE_SITE_LIMIT
        } else {
            DENSE_SITE_LIMIT
        }
    }
}

/// Stepwise exact evolver; keeps only the current state.
pub struct ExactEvolver<'a> {
    lattice: &'a LatticeSpec,
    hamiltonian: SpinHamiltonian,
    state: StateVector,
    time: f64,
}

impl<'a> ExactEvolver<'a> {
    pub fn new(lattice: &'a LatticeSpec, params: &QuenchParams, v: &InteractionMatrix, options: OracleOptions) -> Result<Self> {
        let n = lattice.n_sites();
        if n > options.site_limit() {
            return Err(Error::TooLargeForOracle { n_sites: n, limit: options.site_limit() });
        }
        if v.n_sites() != n {
            return Err(Error::param("interactions", format!("{} sites for a {n}-site lattice", v.n_sites())));
        }
        Ok(Self { lattice, hamiltonian: SpinHamiltonian::new(params, v), state: StateVector::ground(n), time: 0.0 })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn hamiltonian(&self) -> &SpinHamiltonian {
        &self.hamiltonian
    }

    pub fn step(&mut self, dt: f64) {
        self.hamiltonian.propagate(&mut self.state, dt);
        self.time += dt;
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            time: self.time,
            occupation: ObservableMap::from_sites(self.lattice, "n", self.time, &self.state.occupations()),
            energy: self.hamiltonian.expectation(&self.state),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactTrajectory {
    /// Snapshots at t = 0, dt, 2dt, …
    pub snapshots: Vec<Snapshot>,
    pub final_state: StateVector,
}

/// Evolves |00…0⟩ for time `t` in steps of `dt`, recording a snapshot after
/// every step.
pub fn evolve_exact(
    lattice: &LatticeSpec,
    params: &QuenchParams,
    v: &InteractionMatrix,
    t: f64,
    dt: f64,
    options: OracleOptions,
) -> Result<ExactTrajectory> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("{t} must be non-negative")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let ratio = t / dt;
    if (ratio - ratio.round()).abs() > 1e-6 {
        return Err(Error::param("dt", format!("{dt} s does not divide {t} s")));
    }
    let mut evolver = ExactEvolver::new(lattice, params, v, options)?;
    let n_steps = steps_for(t, dt);
    let mut snapshots = Vec::with_capacity(n_steps + 1);
    snapshots.push(evolver.snapshot());
    for _ in 0..n_steps {
        evolver.step(dt);
        snapshots.push(evolver.snapshot());
    }
    Ok(ExactTrajectory { snapshots, final_state: evolver.state })
}
