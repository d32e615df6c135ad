//! Dense row-major rank-3 tensors and the few decompositions the sweeps need.

use nalgebra::DMatrix;
use ndarray::ArrayView2;
use num_complex::Complex64;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<C64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self { dims, data: vec![ZERO; dims.iter().product()] }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dims.iter().product::<usize>(), "tensor size mismatch");
        Self { dims, data }
    }

    /// Boundary environment with a single unit entry.
    pub fn unit() -> Self {
        Self::from_vec([1, 1, 1], vec![ONE])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.data[self.index(i, j, k)]
    }

    /// View as a `(d0·d1) × d2` matrix.
    pub fn as_left_matrix(&self) -> ArrayView2<'_, C64> {
        view(&self.data, self.dims[0] * self.dims[1], self.dims[2])
    }

    /// View as a `d0 × (d1·d2)` matrix.
    pub fn as_right_matrix(&self) -> ArrayView2<'_, C64> {
        view(&self.data, self.dims[0], self.dims[1] * self.dims[2])
    }

    /// Axis permutation: output axis `a` is input axis `order[a]`.
    pub fn permuted(&self, order: [usize; 3]) -> Self {
        let dims = [self.dims[order[0]], self.dims[order[1]], self.dims[order[2]]];
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = [0usize; 3];
        for a in 0..dims[0] {
            idx[order[0]] = a;
            for b in 0..dims[1] {
                idx[order[1]] = b;
                for c in 0..dims[2] {
                    idx[order[2]] = c;
                    out.push(self.data[self.index(idx[0], idx[1], idx[2])]);
                }
            }
        }
        Self { dims, data: out }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn conj(&self) -> Self {
        Self { dims: self.dims, data: self.data.iter().map(|x| x.conj()).collect() }
    }
}

pub(crate) fn view(data: &[C64], rows: usize, cols: usize) -> ArrayView2<'_, C64> {
    ArrayView2::from_shape((rows, cols), data).expect("matrix view shape")
}

/// Row-major product of two matrix views.
pub(crate) fn matmul(a: ArrayView2<'_, C64>, b: ArrayView2<'_, C64>) -> Vec<C64> {
    let c = a.dot(&b);
    if c.is_standard_layout() {
        c.into_raw_vec_and_offset().0
    } else {
        c.iter().copied().collect()
    }
}

/// `aᴴ · b` for row-major `a` (k × m) and `b` (k × n).
pub(crate) fn matmul_adjoint_left(a: &[C64], k: usize, m: usize, b: &[C64], n: usize) -> Vec<C64> {
    let a_conj: Vec<C64> = a.iter().map(|x| x.conj()).collect();
    matmul(view(&a_conj, k, m).t(), view(b, k, n))
}

/// `a · bᴴ` for row-major `a` (m × k) and `b` (n × k).
pub(crate) fn matmul_adjoint_right(a: &[C64], m: usize, k: usize, b: &[C64], n: usize) -> Vec<C64> {
    let b_conj: Vec<C64> = b.iter().map(|x| x.conj()).collect();
    matmul(view(a, m, k), view(&b_conj, n, k).t())
}

fn to_dmatrix(data: &[C64], rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(rows, cols, data)
}

fn to_row_major(m: &DMatrix<C64>) -> Vec<C64> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Thin QR of a row-major `rows × cols` matrix. Returns `(Q, R, rank)` with
/// `Q` of shape `rows × rank` and `R` of shape `rank × cols`.
pub(crate) fn qr(data: &[C64], rows: usize, cols: usize) -> (Vec<C64>, Vec<C64>, usize) {
    let qr = to_dmatrix(data, rows, cols).qr();
    let q = qr.q();
    let r = qr.r();
    let rank = q.ncols();
    (to_row_major(&q), to_row_major(&r), rank)
}

/// Thin LQ of a row-major `rows × cols` matrix: `L` is `rows × rank`, `Q`
/// has orthonormal rows and shape `rank × cols`.
pub(crate) fn lq(data: &[C64], rows: usize, cols: usize) -> (Vec<C64>, Vec<C64>, usize) {
    let adjoint = to_dmatrix(data, rows, cols).adjoint();
    let qr = adjoint.qr();
    let l = qr.r().adjoint();
    let q = qr.q().adjoint();
    let rank = q.nrows();
    (to_row_major(&l), to_row_major(&q), rank)
}

/// Truncated singular value decomposition.
pub(crate) struct Truncated {
    pub u: Vec<C64>,
    /// Kept singular values, renormalised to unit 2-norm.
    pub s: Vec<f64>,
    pub vh: Vec<C64>,
    pub rank: usize,
    /// Discarded fraction of the squared singular values.
    pub discarded: f64,
}

/// SVD of a row-major `rows × cols` matrix keeping at most `max_rank`
/// singular values and dropping those below `rel_cutoff · s_max`.
pub(crate) fn truncated_svd(data: &[C64], rows: usize, cols: usize, max_rank: usize, rel_cutoff: f64) -> Truncated {
    let svd = to_dmatrix(data, rows, cols).svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let vt = svd.v_t.expect("right singular vectors");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let s_max = order.first().map(|&i| sv[i]).unwrap_or(0.0);
    let mut rank = order.iter().take_while(|&&i| sv[i] >= rel_cutoff * s_max).count();
    rank = rank.min(max_rank.max(1)).max(1);
    let kept: Vec<usize> = order[..rank].to_vec();
    let kept_weight: f64 = kept.iter().map(|&i| sv[i] * sv[i]).sum();
    let discarded = if total > 0.0 { ((total - kept_weight) / total).max(0.0) } else { 0.0 };
    let renorm = if kept_weight > 0.0 { kept_weight.sqrt() } else { 1.0 };

    let mut u_out = Vec::with_capacity(rows * rank);
    for i in 0..rows {
        for &k in &kept {
            u_out.push(u[(i, k)]);
        }
    }
    let mut vh_out = Vec::with_capacity(rank * cols);
    for &k in &kept {
        for j in 0..cols {
            vh_out.push(vt[(k, j)]);
        }
    }
    let s = kept.iter().map(|&i| sv[i] / renorm).collect();
    Truncated { u: u_out, s, vh: vh_out, rank, discarded }
}
