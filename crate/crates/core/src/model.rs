//! Square-lattice geometry, snake ordering and the parameters of the
//! constant Rydberg Hamiltonian
//!
//! ```text
//! H = sum_{i<j} V_ij n_i n_j + (omega/2) sum_i sigma^x_i - delta sum_i n_i
//! ```
//!
//! All frequencies are angular (rad/s), lengths are in micrometres and
//! durations in seconds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmetry::Symmetry;

/// 2π · 138 GHz·µm⁶, a typical C6 for the 60S Rydberg level.
pub const DEFAULT_C6: f64 = 2.0 * PI * 138.0e9;

/// Rabi frequency of the reference quench, 2π · 2 MHz.
pub const DEFAULT_OMEGA: f64 = 2.0 * PI * 2.0e6;

pub const DEFAULT_H_X: f64 = 2.5;

/// Interaction cutoff in units of the lattice spacing.
pub const DEFAULT_CUTOFF_FACTOR: f64 = 3.0;

/// Relative slack added to cutoff comparisons so that shells lying exactly
/// on the cutoff survive rounding.
const CUTOFF_SLACK: f64 = 1e-9;

/// Grid cell of a site: `row` counts upwards from the bottom edge and `col`
/// rightwards from the left edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    lx: usize,
    ly: usize,
    spacing_um: f64,
    positions: Vec<[f64; 2]>,
    cells: Vec<Cell>,
}

impl LatticeSpec {
    /// Builds an `lx` × `ly` square lattice whose sites are numbered along a
    /// snake path: row 0 left to right, row 1 right to left, and so on.
    pub fn new(lx: usize, ly: usize, spacing_um: f64) -> Result<Self> {
        if lx == 0 || ly == 0 {
            return Err(Error::InvalidLattice(format!("dimensions {lx}x{ly} must be positive")));
        }
        if !(spacing_um.is_finite() && spacing_um > 0.0) {
            return Err(Error::InvalidLattice(format!("spacing {spacing_um} must be positive")));
        }
        let mut cells = Vec::with_capacity(lx * ly);
        for row in 0..ly {
            if row % 2 == 0 {
                cells.extend((0..lx).map(|col| Cell { row, col }));
            } else {
                cells.extend((0..lx).rev().map(|col| Cell { row, col }));
            }
        }
        let positions = cells
            .iter()
            .map(|c| [c.col as f64 * spacing_um, c.row as f64 * spacing_um])
            .collect();
        Ok(Self { lx, ly, spacing_um, positions, cells })
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn n_sites(&self) -> usize {
        self.cells.len()
    }

    pub fn spacing_um(&self) -> f64 {
        self.spacing_um
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, site: usize) -> Cell {
        self.cells[site]
    }

    /// Snake index of the site at `cell`.
    pub fn site_at(&self, cell: Cell) -> Option<usize> {
        if cell.row >= self.ly || cell.col >= self.lx {
            return None;
        }
        let offset = if cell.row % 2 == 0 { cell.col } else { self.lx - 1 - cell.col };
        Some(cell.row * self.lx + offset)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Site closest to the lattice centroid; ties go to the smallest snake index.
    pub fn central_site(&self) -> usize {
        let n = self.n_sites() as f64;
        let cx = self.positions.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = self.positions.iter().map(|p| p[1]).sum::<f64>() / n;
        let tol = 1e-9 * self.spacing_um;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.positions.iter().enumerate() {
            let d = (p[0] - cx).hypot(p[1] - cy);
            if d < best_d - tol {
                best = k;
                best_d = d;
            }
        }
        best
    }

    /// Site permutation induced by a lattice symmetry: site `k` is sent to
    /// `perm[k]`.
    pub fn symmetry_permutation(&self, g: Symmetry) -> Option<Vec<usize>> {
        if !g.applies_to(self.ly, self.lx) {
            return None;
        }
        Some(
            self.cells
                .iter()
                .map(|&c| {
                    let image = g.apply(c, self.ly, self.lx);
                    self.site_at(image).expect("symmetry maps the grid onto itself")
                })
                .collect(),
        )
    }
}

/// Nearest-neighbour spacing that puts the Rydberg interaction at
/// `c6 / R^6 = 2 omega / h_x`.
pub fn rydberg_spacing(omega: f64, h_x: f64, c6: f64) -> f64 {
    (c6 * h_x / (2.0 * omega)).powf(1.0 / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchParams {
    /// Rabi frequency (rad/s).
    pub omega: f64,
    /// Detuning (rad/s).
    pub delta: f64,
    /// Interaction coefficient (rad·µm⁶/s).
    pub c6: f64,
    pub h_x: f64,
    /// Nearest-neighbour spacing (µm).
    pub spacing_um: f64,
    /// Energy scale c6 / (4 R^6) = omega / (2 h_x) (rad/s).
    pub j: f64,
    /// Quench duration (s).
    pub t_pulse: f64,
    /// Integration step (s).
    pub dt: f64,
}

impl QuenchParams {
    pub fn with_timing(mut self, t_pulse: f64, dt: f64) -> Result<Self> {
        if !(t_pulse.is_finite() && t_pulse >= 0.0) {
            return Err(Error::param("t_pulse", format!("{t_pulse} must be non-negative")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("{dt} must be positive")));
        }
        self.t_pulse = t_pulse;
        self.dt = dt;
        Ok(self)
    }

    /// Same quench with the drive switched off. Used by tests and the
    /// trivial-dynamics checks.
    pub fn without_drive(mut self) -> Self {
        self.omega = 0.0;
        self
    }

    /// Number of integration steps covering the pulse.
    pub fn n_steps(&self) -> usize {
        steps_for(self.t_pulse, self.dt)
    }

    /// Drive-term energy scale N · omega / 2 used to normalise energy drift.
    pub fn energy_scale(&self, n_sites: usize) -> f64 {
        n_sites as f64 * self.omega / 2.0
    }
}

pub(crate) fn steps_for(t: f64, dt: f64) -> usize {
    let ratio = t / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() < 1e-6 {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Derives spacing, energy scale and detuning from the drive parameters.
///
/// The lattice must already be laid out at the derived spacing (see
/// [`rydberg_spacing`]). The detuning is half the full, uncut interaction sum
/// of the central site.
pub fn derive_quench(omega: f64, h_x: f64, c6: f64, lattice: &LatticeSpec) -> Result<QuenchParams> {
    for (name, v) in [("omega", omega), ("h_x", h_x), ("c6", c6)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, format!("{v} must be positive")));
        }
    }
    let spacing_um = rydberg_spacing(omega, h_x, c6);
    if ((lattice.spacing_um() - spacing_um) / spacing_um).abs() > 1e-9 {
        return Err(Error::InvalidLattice(format!(
            "lattice spacing {} um differs from the derived spacing {spacing_um} um",
            lattice.spacing_um()
        )));
    }
    let j = c6 / (4.0 * spacing_um.powi(6));
    let center = lattice.central_site();
    let delta = 0.5
        * (0..lattice.n_sites())
            .filter(|&k| k != center)
            .map(|k| c6 / lattice.distance(center, k).powi(6))
            .sum::<f64>();
    Ok(QuenchParams { omega, delta, c6, h_x, spacing_um, j, t_pulse: 0.0, dt: 1e-9 })
}

/// Builds the lattice at the derived spacing and the matching parameters in
/// one go.
pub fn reference_setup(lx: usize, ly: usize, omega: f64, h_x: f64, c6: f64) -> Result<(LatticeSpec, QuenchParams)> {
    for (name, v) in [("omega", omega), ("h_x", h_x), ("c6", c6)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, format!("{v} must be positive")));
        }
    }
    let lattice = LatticeSpec::new(lx, ly, rydberg_spacing(omega, h_x, c6))?;
    let params = derive_quench(omega, h_x, c6, &lattice)?;
    Ok((lattice, params))
}

/// Symmetric matrix of pair interactions `V_ij = c6 / r_ij^6`, zero beyond
/// the cutoff and on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    n: usize,
    values: Vec<f64>,
    cutoff_um: f64,
}

impl InteractionMatrix {
    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn cutoff_um(&self) -> f64 {
        self.cutoff_um
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Nonzero couplings `(i, j, V_ij)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let v = self.get(i, j);
                (v != 0.0).then_some((i, j, v))
            })
        })
    }

    /// Relabels sites so that old site `k` becomes `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[perm[i] * n + perm[j]] = self.get(i, j);
            }
        }
        Self { n, values, cutoff_um: self.cutoff_um }
    }
}

pub fn interactions(lattice: &LatticeSpec, params: &QuenchParams, cutoff_um: f64) -> Result<InteractionMatrix> {
    let spacing = lattice.spacing_um();
    if !(cutoff_um >= spacing * (1.0 - CUTOFF_SLACK)) {
        return Err(Error::CutoffTooSmall { cutoff_um, spacing_um: spacing });
    }
    let n = lattice.n_sites();
    let limit = cutoff_um * (1.0 + CUTOFF_SLACK);
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = lattice.distance(i, j);
            if r <= limit {
                let v = params.c6 / r.powi(6);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
    }
    Ok(InteractionMatrix { n, values, cutoff_um })
}

/// Interactions with the default cutoff of [`DEFAULT_CUTOFF_FACTOR`] spacings.
pub fn default_interactions(lattice: &LatticeSpec, params: &QuenchParams) -> Result<InteractionMatrix> {
    interactions(lattice, params, DEFAULT_CUTOFF_FACTOR * lattice.spacing_um())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(lx: usize, ly: usize) -> (LatticeSpec, QuenchParams) {
        reference_setup(lx, ly, DEFAULT_OMEGA, DEFAULT_H_X, DEFAULT_C6).unwrap()
    }

    #[test]
    fn single_site_lattice() {
        let l = LatticeSpec::new(1, 1, 5.0).unwrap();
        assert_eq!(l.n_sites(), 1);
        assert_eq!(l.positions()[0], [0.0, 0.0]);
        assert_eq!(l.central_site(), 0);
    }

    #[test]
    fn snake_order_3x3() {
        let l = LatticeSpec::new(3, 3, 5.0).unwrap();
        let expected = [(0, 0), (1, 0), (2, 0), (2, 1), (1, 1), (0, 1), (0, 2), (1, 2), (2, 2)];
        for (k, &(col, row)) in expected.iter().enumerate() {
            assert_eq!(l.cell(k), Cell { row, col });
            assert_eq!(l.site_at(Cell { row, col }), Some(k));
            assert_eq!(l.positions()[k], [col as f64 * 5.0, row as f64 * 5.0]);
        }
    }

    #[test]
    fn ten_by_ten_has_hundred_sites() {
        let l = LatticeSpec::new(10, 10, 6.0).unwrap();
        assert_eq!(l.n_sites(), 100);
        for i in 0..100 {
            for j in (i + 1)..100 {
                assert!(l.distance(i, j) >= 6.0 - 1e-12);
            }
        }
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(matches!(LatticeSpec::new(0, 3, 5.0), Err(Error::InvalidLattice(_))));
        assert!(matches!(LatticeSpec::new(3, 0, 5.0), Err(Error::InvalidLattice(_))));
        assert!(matches!(LatticeSpec::new(3, 3, -1.0), Err(Error::InvalidLattice(_))));
    }

    #[test]
    fn central_site_tie_breaks_on_snake_index() {
        // 2x2: all four sites are equidistant from the centroid.
        assert_eq!(LatticeSpec::new(2, 2, 1.0).unwrap().central_site(), 0);
        assert_eq!(LatticeSpec::new(3, 3, 1.0).unwrap().central_site(), 4);
        // 4x4: candidates are snake sites 5, 6, 9, 10
        assert_eq!(LatticeSpec::new(4, 4, 1.0).unwrap().central_site(), 5);
    }

    #[test]
    fn reference_energy_scale() {
        let (_, p) = setup(3, 3);
        let two_pi = 2.0 * PI;
        assert!((p.j - two_pi * 0.4e6).abs() / p.j < 1e-12);
        assert!((400e-9 * p.j - 1.005).abs() < 0.01);
        assert!((4e-6 * p.j - 10.05).abs() < 0.1);
    }

    #[test]
    fn unit_spacing_identity() {
        let omega = 3.0e6;
        assert!((rydberg_spacing(omega, 2.0, omega) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derived_relations_hold() {
        for &(omega, h_x, c6) in &[(DEFAULT_OMEGA, 2.5, DEFAULT_C6), (1.0e6, 0.7, 3.0e9), (5.0e7, 10.0, 1.0e12)] {
            let (l, p) = reference_setup(3, 2, omega, h_x, c6).unwrap();
            let r6 = p.spacing_um.powi(6);
            assert!(((c6 / r6) / (2.0 * omega / h_x) - 1.0).abs() < 1e-12);
            assert!((4.0 * p.j * r6 / c6 - 1.0).abs() < 1e-12);
            assert!((p.j / (omega / (2.0 * h_x)) - 1.0).abs() < 1e-12);
            assert_eq!(l.spacing_um(), p.spacing_um);
        }
    }

    #[test]
    fn detuning_uses_uncut_sum_of_central_site() {
        let (l, p) = setup(3, 3);
        let vnn = 2.0 * p.omega / p.h_x;
        // shells around the centre of a 3x3: 4 at R, 4 at sqrt(2) R
        let expected = 0.5 * vnn * (4.0 + 4.0 / 8.0);
        assert!((p.delta - expected).abs() / expected < 1e-12);
        assert_eq!(l.central_site(), 4);
    }

    #[test]
    fn results_do_not_depend_on_c6() {
        let (l1, p1) = reference_setup(4, 3, DEFAULT_OMEGA, 2.5, DEFAULT_C6).unwrap();
        let (l2, p2) = reference_setup(4, 3, DEFAULT_OMEGA, 2.5, 7.0 * DEFAULT_C6).unwrap();
        assert!((p1.delta - p2.delta).abs() / p1.delta < 1e-12);
        assert!((p1.j - p2.j).abs() / p1.j < 1e-12);
        let v1 = default_interactions(&l1, &p1).unwrap();
        let v2 = default_interactions(&l2, &p2).unwrap();
        for i in 0..l1.n_sites() {
            for j in 0..l1.n_sites() {
                assert!((v1.get(i, j) - v2.get(i, j)).abs() <= 1e-9 * v1.get(i, j).abs().max(1.0));
            }
        }
    }

    #[test]
    fn two_site_coupling() {
        let (l, p) = setup(2, 1);
        let v = interactions(&l, &p, l.spacing_um()).unwrap();
        let expected = 2.0 * p.omega / p.h_x;
        assert!((v.get(0, 1) - expected).abs() / expected < 1e-12);
        assert_eq!(v.get(0, 0), 0.0);
        assert_eq!(v.get(0, 1), v.get(1, 0));
    }

    #[test]
    fn nearest_neighbour_cutoff_keeps_grid_edges() {
        let (l, p) = setup(3, 3);
        let v = interactions(&l, &p, l.spacing_um()).unwrap();
        assert_eq!(v.pairs().count(), 12);
        for i in 0..9 {
            assert_eq!(v.get(i, i), 0.0);
        }
    }

    #[test]
    fn cutoff_below_spacing_is_rejected() {
        let (l, p) = setup(3, 3);
        let err = interactions(&l, &p, 0.5 * l.spacing_um()).unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall { .. }));
    }

    #[test]
    fn interactions_invariant_under_lattice_symmetries() {
        for &(lx, ly) in &[(3usize, 3usize), (4, 4), (4, 3)] {
            let (l, p) = setup(lx, ly);
            let v = default_interactions(&l, &p).unwrap();
            for g in Symmetry::ALL {
                let Some(perm) = l.symmetry_permutation(g) else { continue };
                let w = v.permuted(&perm);
                for i in 0..l.n_sites() {
                    for j in 0..l.n_sites() {
                        assert!((w.get(i, j) - v.get(i, j)).abs() <= 1e-9 * v.get(i, j).abs());
                    }
                }
            }
        }
    }
}
