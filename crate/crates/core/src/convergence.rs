//! Convergence gates for classical runs and the minimum-χ search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InteractionMatrix, LatticeSpec, QuenchParams};
use crate::mps::{run_quench, QuenchOptions, QuenchRun};
use crate::observables::ObservableMap;
use crate::symmetry::Symmetry;

/// Maximum tolerated energy drift relative to the energy scale.
pub const ENERGY_DRIFT_GATE: f64 = 0.05;
/// Maximum tolerated symmetry violation relative to the map's range.
pub const D8_GATE: f64 = 0.40;
/// Maximum tolerated integrated infidelity, when one is supplied.
pub const R2_GATE: f64 = 0.05;

pub const NORM_CONVENTION: &str = "max-norm over group elements / (max - min) of the map";

/// Desk-scale bond-dimension grid.
pub const DEFAULT_CHI_GRID: [usize; 5] = [8, 16, 32, 64, 128];

/// Largest `|E(t) - E(0)|` over the trajectory, divided by `e_scale`.
pub fn energy_drift(energies: &[f64], e_scale: f64) -> Result<f64> {
    if !(e_scale.is_finite() && e_scale > 0.0) {
        return Err(Error::InvalidScale(e_scale));
    }
    let Some(&e0) = energies.first() else {
        return Err(Error::param("energies", "trajectory is empty"));
    };
    Ok(energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e_scale)
}

/// Worst deviation of the map from its images under the lattice symmetry
/// group, as a fraction of the map's range. Constant maps give 0.
pub fn d8_error(obs: &ObservableMap) -> f64 {
    let values = obs.values();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return 0.0;
    }
    Symmetry::group(obs.rows(), obs.cols())
        .iter()
        .map(|&g| obs.max_abs_diff(&obs.transformed(g)))
        .fold(0.0, f64::max)
        / range
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub energy_drift_rel: f64,
    pub d8_error_rel: f64,
    /// Integrated infidelity from a variational run, if available.
    pub r2_integrated: Option<f64>,
    pub passed: bool,
    pub e_scale: f64,
    pub norm_convention: String,
}

impl ConvergenceVerdict {
    pub fn from_parts(energy_drift_rel: f64, d8_error_rel: f64, r2_integrated: Option<f64>, e_scale: f64) -> Self {
        let passed = energy_drift_rel < ENERGY_DRIFT_GATE
            && d8_error_rel < D8_GATE
            && r2_integrated.is_none_or(|r2| r2 <= R2_GATE);
        Self { energy_drift_rel, d8_error_rel, r2_integrated, passed, e_scale, norm_convention: NORM_CONVENTION.to_string() }
    }

    /// Judges a trajectory by its energy history and its final occupation
    /// map. The symmetry check uses the last map only: at early times the
    /// occupations span a tiny range and the relative error is dominated by
    /// round-off.
    pub fn evaluate(energies: &[f64], e_scale: f64, final_map: &ObservableMap, r2_integrated: Option<f64>) -> Result<Self> {
        let drift = energy_drift(energies, e_scale)?;
        Ok(Self::from_parts(drift, d8_error(final_map), r2_integrated, e_scale))
    }

    pub fn for_run(run: &QuenchRun, e_scale: f64) -> Result<Self> {
        let energies: Vec<f64> = run.snapshots.iter().map(|s| s.energy).collect();
        Self::evaluate(&energies, e_scale, run.final_map(), None)
    }
}

/// Energy scale used by the search: `N·Ω/2`, or `N·J` for an undriven quench
/// where the drive scale vanishes.
pub fn verdict_scale(params: &QuenchParams, n_sites: usize) -> f64 {
    let drive = params.energy_scale(n_sites);
    if drive > 0.0 {
        drive
    } else {
        n_sites as f64 * params.j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiCandidate {
    pub chi: usize,
    pub verdict: Option<ConvergenceVerdict>,
    /// Total wall time of the run (s).
    pub run_seconds: Option<f64>,
    /// Error code when the run was refused.
    pub refused: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum ChiSearch {
    Converged { chi: usize, run_seconds: f64, verdict: ConvergenceVerdict, candidates: Vec<ChiCandidate> },
    Unconverged { cause: Option<String>, candidates: Vec<ChiCandidate> },
}

impl ChiSearch {
    pub fn chi(&self) -> Option<usize> {
        match self {
            ChiSearch::Converged { chi, .. } => Some(*chi),
            ChiSearch::Unconverged { .. } => None,
        }
    }

    pub fn candidates(&self) -> &[ChiCandidate] {
        match self {
            ChiSearch::Converged { candidates, .. } | ChiSearch::Unconverged { candidates, .. } => candidates,
        }
    }
}

/// Runs every χ of the grid (concurrently) and returns the smallest one whose
/// run passes the verdict. `options.tdvp.max_chi` is overridden per candidate.
/// Runs refused by the memory budget count as unconverged.
pub fn min_converged_chi(
    lattice: &LatticeSpec,
    params: &QuenchParams,
    v: &InteractionMatrix,
    chi_grid: &[usize],
    options: &QuenchOptions,
) -> Result<ChiSearch> {
    if chi_grid.is_empty() {
        return Err(Error::param("chi_grid", "must not be empty"));
    }
    if chi_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("chi_grid", "must be strictly increasing"));
    }
    let e_scale = verdict_scale(params, lattice.n_sites());
    let candidates = chi_grid
        .par_iter()
        .map(|&chi| {
            let mut opts = *options;
            opts.tdvp.max_chi = chi;
            match run_quench(lattice, params, v, &opts) {
                Ok(run) => {
                    let verdict = ConvergenceVerdict::for_run(&run, e_scale)?;
                    let seconds = run.records.iter().map(|r| r.wall_seconds).sum();
                    Ok(ChiCandidate { chi, verdict: Some(verdict), run_seconds: Some(seconds), refused: None })
                }
                Err(e @ Error::MemoryBudgetExceeded { .. }) => {
                    Ok(ChiCandidate { chi, verdict: None, run_seconds: None, refused: Some(e.code().to_string()) })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let winner = candidates.iter().find(|c| c.verdict.as_ref().is_some_and(|v| v.passed));
    Ok(match winner {
        Some(c) => ChiSearch::Converged {
            chi: c.chi,
            run_seconds: c.run_seconds.unwrap_or_default(),
            verdict: c.verdict.clone().expect("passing candidate has a verdict"),
            candidates: candidates.clone(),
        },
        None => {
            let cause = candidates.iter().rev().find_map(|c| c.refused.clone());
            ChiSearch::Unconverged { cause, candidates }
        }
    })
}
