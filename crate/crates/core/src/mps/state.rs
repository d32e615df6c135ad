//! Matrix product states with a single orthogonality centre.

use rand::Rng;
use rand_distr::StandardNormal;

use super::env::update_left;
use super::mpo::{MpoHamiltonian, PHYS_DIM};
use super::tensor::{lq, matmul, qr, view, Tensor3, C64, ONE, ZERO};

/// Site tensors have shape `(chi_left, d, chi_right)`; tensors left of the
/// centre are left-isometries and tensors right of it right-isometries.
#[derive(Debug, Clone)]
pub struct MpsState {
    tensors: Vec<Tensor3>,
    center: usize,
    max_chi: usize,
    truncation_weight: f64,
}

/// Largest bond dimension representable on bond `k` of an `n`-site chain.
pub(crate) fn exact_bond_limit(k: usize, n: usize) -> usize {
    let e = k.min(n - k);
    if e >= usize::BITS as usize - 1 {
        usize::MAX
    } else {
        1usize << e
    }
}

impl MpsState {
    /// The product state |00…0⟩.
    pub fn ground(n_sites: usize, max_chi: usize) -> Self {
        assert!(n_sites > 0, "empty chain");
        let tensors = (0..n_sites)
            .map(|_| Tensor3::from_vec([1, PHYS_DIM, 1], vec![ONE, ZERO]))
            .collect();
        Self { tensors, center: 0, max_chi: max_chi.max(1), truncation_weight: 0.0 }
    }

    /// Random normalised state whose bonds are saturated at
    /// `min(chi, 2^k, 2^(N-k))`. Used to time sweeps at a fixed bond
    /// dimension.
    pub fn random<R: Rng + ?Sized>(n_sites: usize, chi: usize, rng: &mut R) -> Self {
        assert!(n_sites > 0, "empty chain");
        let bonds: Vec<usize> = (0..=n_sites).map(|k| exact_bond_limit(k, n_sites).min(chi.max(1))).collect();
        let tensors = (0..n_sites)
            .map(|k| {
                let dims = [bonds[k], PHYS_DIM, bonds[k + 1]];
                let len = dims.iter().product();
                let data = (0..len).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
                Tensor3::from_vec(dims, data)
            })
            .collect();
        let mut state = Self { tensors, center: n_sites - 1, max_chi: chi.max(1), truncation_weight: 0.0 };
        state.move_center(0);
        state.normalize();
        state
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[Tensor3] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut Vec<Tensor3> {
        &mut self.tensors
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub(crate) fn set_center(&mut self, center: usize) {
        self.center = center;
    }

    pub fn max_chi(&self) -> usize {
        self.max_chi
    }

    pub fn set_max_chi(&mut self, max_chi: usize) {
        self.max_chi = max_chi.max(1);
    }

    /// Cumulative discarded weight of all truncations so far.
    pub fn truncation_weight(&self) -> f64 {
        self.truncation_weight
    }

    pub(crate) fn add_truncation(&mut self, w: f64) {
        self.truncation_weight += w;
    }

    /// `chi_0 … chi_N`.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.tensors.iter().map(|t| t.dims()[0]).collect();
        dims.push(self.tensors.last().map_or(1, |t| t.dims()[2]));
        dims
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn norm(&self) -> f64 {
        self.tensors[self.center].norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.tensors[self.center].scale(1.0 / n);
        }
    }

    /// Shifts the orthogonality centre with QR / LQ sweeps.
    pub fn move_center(&mut self, target: usize) {
        assert!(target < self.n_sites());
        while self.center < target {
            let k = self.center;
            let [cl, d, cr] = self.tensors[k].dims();
            let (q, r, rank) = qr(self.tensors[k].data(), cl * d, cr);
            self.tensors[k] = Tensor3::from_vec([cl, d, rank], q);
            let next = &self.tensors[k + 1];
            let [_, d2, cr2] = next.dims();
            let merged = matmul(view(&r, rank, cr), next.as_right_matrix());
            self.tensors[k + 1] = Tensor3::from_vec([rank, d2, cr2], merged);
            self.center += 1;
        }
        while self.center > target {
            let k = self.center;
            let [cl, d, cr] = self.tensors[k].dims();
            let (l, q, rank) = lq(self.tensors[k].data(), cl, d * cr);
            self.tensors[k] = Tensor3::from_vec([rank, d, cr], q);
            let prev = &self.tensors[k - 1];
            let [cl0, d0, _] = prev.dims();
            let merged = matmul(prev.as_left_matrix(), view(&l, cl, rank));
            self.tensors[k - 1] = Tensor3::from_vec([cl0, d0, rank], merged);
            self.center -= 1;
        }
    }

    /// Largest deviation from the isometry conditions on either side of the
    /// centre.
    pub fn canonical_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (k, t) in self.tensors.iter().enumerate() {
            let [cl, d, cr] = t.dims();
            if k == self.center {
                continue;
            }
            let gram = if k < self.center {
                super::tensor::matmul_adjoint_left(t.data(), cl * d, cr, t.data(), cr)
            } else {
                super::tensor::matmul_adjoint_right(t.data(), cl, d * cr, t.data(), cl)
            };
            let m = if k < self.center { cr } else { cl };
            for i in 0..m {
                for j in 0..m {
                    let expected = if i == j { ONE } else { ZERO };
                    worst = worst.max((gram[i * m + j] - expected).norm());
                }
            }
        }
        worst
    }

    /// ⟨n_k⟩ on every site.
    pub fn occupations(&self) -> Vec<f64> {
        let mut work = self.clone();
        work.move_center(0);
        let norm2 = work.tensors[0].norm_sqr();
        let n = work.n_sites();
        let mut occ = Vec::with_capacity(n);
        for k in 0..n {
            if k > 0 {
                work.move_center(k);
            }
            let t = &work.tensors[k];
            let [cl, _, cr] = t.dims();
            let mut acc = 0.0;
            for a in 0..cl {
                for b in 0..cr {
                    acc += t.get(a, 1, b).norm_sqr();
                }
            }
            occ.push(acc / norm2);
        }
        occ
    }

    /// ⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩.
    pub fn energy(&self, mpo: &MpoHamiltonian) -> f64 {
        assert_eq!(mpo.n_sites(), self.n_sites());
        let mut env = Tensor3::unit();
        for (k, t) in self.tensors.iter().enumerate() {
            env = update_left(&env, t, mpo.entries(k), mpo.bond_profile()[k + 1]);
        }
        let norm2 = self.norm_sqr_full();
        env.data()[0].re / norm2
    }

    fn norm_sqr_full(&self) -> f64 {
        // transfer-matrix contraction, independent of the gauge
        let mut rho = vec![ONE];
        let mut dim = 1;
        for t in &self.tensors {
            let [cl, d, cr] = t.dims();
            debug_assert_eq!(cl, dim);
            let x = matmul(view(&rho, cl, cl), t.as_right_matrix());
            // x: (a', s, b) ; rho'[b', b] = sum conj(t[a', s, b']) x[a', s, b]
            rho = super::tensor::matmul_adjoint_left(t.data(), cl * d, cr, &x, cr);
            dim = cr;
        }
        rho[0].re
    }

    /// Contracts to a dense state vector with site `k` on bit `k`.
    pub fn to_amplitudes(&self) -> Vec<C64> {
        // amplitudes[(basis, bond)]
        let mut partial = vec![ONE];
        let mut dim = 1usize;
        for (k, t) in self.tensors.iter().enumerate() {
            let [cl, d, cr] = t.dims();
            let mut next = vec![ZERO; dim * d * cr];
            for b in 0..dim {
                for a in 0..cl {
                    let coeff = partial[b * cl + a];
                    if coeff == ZERO {
                        continue;
                    }
                    for s in 0..d {
                        let basis = b + (s << k);
                        for c in 0..cr {
                            next[basis * cr + c] += coeff * t.get(a, s, c);
                        }
                    }
                }
            }
            partial = next;
            dim *= d;
        }
        partial
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ground_state_occupations_vanish() {
        let s = MpsState::ground(5, 8);
        assert!(s.occupations().iter().all(|&x| x == 0.0));
        assert_eq!(s.bond_dims(), vec![1; 6]);
        assert!(s.canonical_error() < 1e-15);
    }

    #[test]
    fn random_state_is_canonical_and_saturated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = MpsState::random(8, 6, &mut rng);
        assert_eq!(s.bond_dims(), vec![1, 2, 4, 6, 6, 6, 4, 2, 1]);
        assert!(s.canonical_error() < 1e-10);
        assert!((s.norm() - 1.0).abs() < 1e-12);
        let amps = s.to_amplitudes();
        let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moving_centre_keeps_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = MpsState::random(6, 4, &mut rng);
        let before = s.to_amplitudes();
        s.move_center(4);
        assert_eq!(s.center(), 4);
        assert!(s.canonical_error() < 1e-10);
        let after = s.to_amplitudes();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).norm() < 1e-10);
        }
        let occ_dense: Vec<f64> = (0..6)
            .map(|k| after.iter().enumerate().filter(|(b, _)| (b >> k) & 1 == 1).map(|(_, a)| a.norm_sqr()).sum())
            .collect();
        for (x, y) in s.occupations().iter().zip(&occ_dense) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
