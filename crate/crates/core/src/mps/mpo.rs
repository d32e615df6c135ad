//! Finite-automaton MPO for the long-range Rydberg Hamiltonian on the snake
//! path.
//!
//! Virtual channels on the bond left of site `k`:
//! * `start`: nothing placed yet (identity so far),
//! * one channel per earlier site `i < k` that still couples to some `j >= k`,
//!   carrying `n_i` until its partners are reached,
//! * `done`: a complete term has been placed.
//!
//! The bond dimension is therefore `2 + #open sites`, except at the two
//! boundaries where only `start` (left) or `done` (right) survive.

use ndarray::Array4;
use serde::Serialize;

use crate::model::{InteractionMatrix, LatticeSpec, QuenchParams};

pub const PHYS_DIM: usize = 2;

pub type Op2 = [[f64; 2]; 2];

const IDENTITY: Op2 = [[1.0, 0.0], [0.0, 1.0]];
const NUMBER: Op2 = [[0.0, 0.0], [0.0, 1.0]];

/// Nonzero block of an MPO tensor: `op[out][in]` between the left channel
/// `left` and the right channel `right`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpoEntry {
    pub left: usize,
    pub right: usize,
    pub op: Op2,
}

#[derive(Debug, Clone)]
pub struct MpoHamiltonian {
    /// `(h_left, d_out, d_in, h_right)` per site.
    tensors: Vec<Array4<f64>>,
    entries: Vec<Vec<MpoEntry>>,
    bond_profile: Vec<usize>,
}

struct Channels {
    open: Vec<usize>,
    has_start: bool,
    has_done: bool,
}

impl Channels {
    fn dim(&self) -> usize {
        self.open.len() + usize::from(self.has_start) + usize::from(self.has_done)
    }

    fn start(&self) -> Option<usize> {
        self.has_start.then_some(0)
    }

    fn open(&self, site: usize) -> Option<usize> {
        self.open.binary_search(&site).ok().map(|p| p + usize::from(self.has_start))
    }

    fn done(&self) -> Option<usize> {
        self.has_done.then(|| self.dim() - 1)
    }
}

fn scaled(op: Op2, factor: f64) -> Op2 {
    [[op[0][0] * factor, op[0][1] * factor], [op[1][0] * factor, op[1][1] * factor]]
}

pub fn build_mpo(lattice: &LatticeSpec, params: &QuenchParams, v: &InteractionMatrix) -> MpoHamiltonian {
    let n = lattice.n_sites();
    assert_eq!(v.n_sites(), n, "interaction matrix does not match the lattice");

    // last partner of every site along the path
    let reach: Vec<Option<usize>> = (0..n).map(|i| ((i + 1)..n).filter(|&j| v.get(i, j) != 0.0).max()).collect();
    let channels: Vec<Channels> = (0..=n)
        .map(|k| Channels {
            open: (0..k).filter(|&i| reach[i].is_some_and(|r| r >= k)).collect(),
            has_start: k < n,
            has_done: k > 0,
        })
        .collect();

    let local: Op2 = [
        [0.0, params.omega / 2.0],
        [params.omega / 2.0, -params.delta],
    ];

    let mut entries = Vec::with_capacity(n);
    for k in 0..n {
        let (lc, rc) = (&channels[k], &channels[k + 1]);
        let mut site = Vec::new();
        if let Some(ls) = lc.start() {
            if let Some(rs) = rc.start() {
                site.push(MpoEntry { left: ls, right: rs, op: IDENTITY });
            }
            if let Some(ro) = rc.open(k) {
                site.push(MpoEntry { left: ls, right: ro, op: NUMBER });
            }
            if let Some(rd) = rc.done() {
                site.push(MpoEntry { left: ls, right: rd, op: local });
            }
        }
        for &i in &lc.open {
            let li = lc.open(i).expect("open channel");
            if let Some(ri) = rc.open(i) {
                site.push(MpoEntry { left: li, right: ri, op: IDENTITY });
            }
            let vik = v.get(i, k);
            if vik != 0.0 {
                let rd = rc.done().expect("done channel right of an interior site");
                site.push(MpoEntry { left: li, right: rd, op: scaled(NUMBER, vik) });
            }
        }
        if let (Some(ld), Some(rd)) = (lc.done(), rc.done()) {
            site.push(MpoEntry { left: ld, right: rd, op: IDENTITY });
        }
        entries.push(site);
    }

    let bond_profile: Vec<usize> = channels.iter().map(Channels::dim).collect();
    let tensors = entries
        .iter()
        .enumerate()
        .map(|(k, site)| {
            let mut w = Array4::<f64>::zeros((bond_profile[k], PHYS_DIM, PHYS_DIM, bond_profile[k + 1]));
            for e in site {
                for so in 0..PHYS_DIM {
                    for si in 0..PHYS_DIM {
                        w[[e.left, so, si, e.right]] += e.op[so][si];
                    }
                }
            }
            w
        })
        .collect();
    MpoHamiltonian { tensors, entries, bond_profile }
}

impl MpoHamiltonian {
    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[Array4<f64>] {
        &self.tensors
    }

    pub fn entries(&self, site: usize) -> &[MpoEntry] {
        &self.entries[site]
    }

    /// Bond dimensions `h_0 … h_N`.
    pub fn bond_profile(&self) -> &[usize] {
        &self.bond_profile
    }

    pub fn max_bond(&self) -> usize {
        self.bond_profile.iter().copied().max().unwrap_or(1)
    }

    /// Contracts the MPO into a dense `2^N × 2^N` row-major matrix, site `k`
    /// on bit `k`. Only sensible for small `N`.
    pub fn to_dense(&self) -> Vec<f64> {
        // partial[(row, col, channel)] over the first k sites
        let mut dim = 1usize;
        let mut h = 1usize;
        let mut partial = vec![1.0f64];
        for (k, site) in self.entries.iter().enumerate() {
            let h_next = self.bond_profile[k + 1];
            let new_dim = dim * 2;
            let mut next = vec![0.0; new_dim * new_dim * h_next];
            for row in 0..dim {
                for col in 0..dim {
                    let base = (row * dim + col) * h;
                    for e in site {
                        let coeff = partial[base + e.left];
                        if coeff == 0.0 {
                            continue;
                        }
                        for so in 0..2 {
                            for si in 0..2 {
                                let x = e.op[so][si];
                                if x == 0.0 {
                                    continue;
                                }
                                let r = row + (so << k);
                                let c = col + (si << k);
                                next[(r * new_dim + c) * h_next + e.right] += coeff * x;
                            }
                        }
                    }
                }
            }
            partial = next;
            dim = new_dim;
            h = h_next;
        }
        debug_assert_eq!(h, 1);
        partial
    }
}
