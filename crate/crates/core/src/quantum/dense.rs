//! Dense complex kernels: matrix exponential and block-diagonal propagators.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64 as C64;

use super::sparse::SparseOperator;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub fn matmul_into(dst: &mut Mat<C64>, lhs: MatRef<'_, C64>, rhs: MatRef<'_, C64>) {
    matmul(dst.as_mut(), Accum::Replace, lhs, rhs, ONE, Par::Seq);
}

pub fn product(lhs: MatRef<'_, C64>, rhs: MatRef<'_, C64>) -> Mat<C64> {
    let mut out = Mat::zeros(lhs.nrows(), rhs.ncols());
    matmul_into(&mut out, lhs, rhs);
    out
}

fn one_norm(a: MatRef<'_, C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn combine(terms: &[(f64, MatRef<'_, C64>)], identity_coeff: f64, n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| {
        let mut acc = if i == j { C64::new(identity_coeff, 0.0) } else { ZERO };
        for (c, m) in terms {
            acc += m[(i, j)] * *c;
        }
        acc
    })
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade approximant.
pub fn expm(a: MatRef<'_, C64>) -> Mat<C64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let a2 = product(a.as_ref(), a.as_ref());
    let a4 = product(a2.as_ref(), a2.as_ref());
    let a6 = product(a4.as_ref(), a2.as_ref());

    let inner_u = combine(&[(B[13], a6.as_ref()), (B[11], a4.as_ref()), (B[9], a2.as_ref())], 0.0, n);
    let mut u = product(a6.as_ref(), inner_u.as_ref());
    u = combine(
        &[(1.0, u.as_ref()), (B[7], a6.as_ref()), (B[5], a4.as_ref()), (B[3], a2.as_ref())],
        B[1],
        n,
    );
    let u = product(a.as_ref(), u.as_ref());

    let inner_v = combine(&[(B[12], a6.as_ref()), (B[10], a4.as_ref()), (B[8], a2.as_ref())], 0.0, n);
    let v = product(a6.as_ref(), inner_v.as_ref());
    let v = combine(
        &[(1.0, v.as_ref()), (B[6], a6.as_ref()), (B[4], a4.as_ref()), (B[2], a2.as_ref())],
        B[0],
        n,
    );

    let p = Mat::from_fn(n, n, |i, j| v[(i, j)] + u[(i, j)]);
    let q = Mat::from_fn(n, n, |i, j| v[(i, j)] - u[(i, j)]);
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = product(r.as_ref(), r.as_ref());
    }
    r
}

/// Partition of basis indices into the connected components of the union of
/// the operators' sparsity patterns. Each block is invariant under all of them.
pub fn connected_blocks(dim: usize, ops: &[&SparseOperator]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for op in ops {
        for (r, c, _) in op.iter() {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; dim];
    for i in 0..dim {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[root]].push(i);
    }
    blocks
}

#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    /// Row-major copy for matrix-vector products.
    rows: Vec<C64>,
    mat: Mat<C64>,
    adj: Mat<C64>,
}

/// Dense operator that is block diagonal up to a permutation of the basis.
#[derive(Debug, Clone)]
pub struct BlockDense {
    dim: usize,
    blocks: Vec<Block>,
}

impl BlockDense {
    /// `exp(factor * generator)` restricted to the given invariant blocks.
    pub fn exp_of(generator: &SparseOperator, factor: C64, partition: &[Vec<usize>]) -> Self {
        let dim = generator.dim();
        let mut local = vec![usize::MAX; dim];
        let blocks = partition
            .iter()
            .map(|indices| {
                for (k, &i) in indices.iter().enumerate() {
                    local[i] = k;
                }
                let m = indices.len();
                let mut g = Mat::<C64>::zeros(m, m);
                for (k, &i) in indices.iter().enumerate() {
                    for (j, v) in generator.row(i) {
                        let l = local[j];
                        assert!(l != usize::MAX && indices[l] == j, "partition is not invariant");
                        g[(k, l)] += v * factor;
                    }
                }
                let mat = expm(g.as_ref());
                Block::new(indices.clone(), mat)
            })
            .collect();
        Self { dim, blocks }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }

    /// `out = U x`. Blocks whose input is identically zero are skipped.
    pub fn apply(&self, x: &[C64], out: &mut [C64], scratch: &mut Vec<C64>) {
        for b in &self.blocks {
            let m = b.indices.len();
            scratch.clear();
            scratch.extend(b.indices.iter().map(|&i| x[i]));
            if scratch.iter().all(|v| *v == ZERO) {
                for &i in &b.indices {
                    out[i] = ZERO;
                }
                continue;
            }
            for (r, &i) in b.indices.iter().enumerate() {
                let row = &b.rows[r * m..(r + 1) * m];
                let mut re = 0.0;
                let mut im = 0.0;
                for (a, v) in row.iter().zip(scratch.iter()) {
                    re += a.re * v.re - a.im * v.im;
                    im += a.re * v.im + a.im * v.re;
                }
                out[i] = C64::new(re, im);
            }
        }
    }

    /// `out = U rho U^dag`, skipping block pairs where `rho` vanishes.
    pub fn sandwich(&self, rho: &Mat<C64>, out: &mut Mat<C64>) {
        for ba in &self.blocks {
            for bb in &self.blocks {
                let sub = Mat::from_fn(ba.indices.len(), bb.indices.len(), |i, j| {
                    rho[(ba.indices[i], bb.indices[j])]
                });
                let nonzero = (0..sub.ncols()).any(|j| (0..sub.nrows()).any(|i| sub[(i, j)] != ZERO));
                if !nonzero {
                    for &i in &ba.indices {
                        for &j in &bb.indices {
                            out[(i, j)] = ZERO;
                        }
                    }
                    continue;
                }
                let left = product(ba.mat.as_ref(), sub.as_ref());
                let res = product(left.as_ref(), bb.adj.as_ref());
                for (k, &i) in ba.indices.iter().enumerate() {
                    for (l, &j) in bb.indices.iter().enumerate() {
                        out[(i, j)] = res[(k, l)];
                    }
                }
            }
        }
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::zeros(self.dim, self.dim);
        for b in &self.blocks {
            for (k, &i) in b.indices.iter().enumerate() {
                for (l, &j) in b.indices.iter().enumerate() {
                    m[(i, j)] = b.mat[(k, l)];
                }
            }
        }
        m
    }
}

impl Block {
    fn new(indices: Vec<usize>, mat: Mat<C64>) -> Self {
        let m = indices.len();
        let rows = (0..m * m).map(|k| mat[(k / m, k % m)]).collect();
        let adj = mat.adjoint().to_owned();
        Self { indices, rows, mat, adj }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::space::HilbertSpec;
    use crate::quantum::sparse::{build_ladder, build_pauli, Pauli};

    /// Truncated Taylor series with scaling and squaring, independent of the Pade path.
    fn taylor_expm(a: MatRef<'_, C64>) -> Mat<C64> {
        let n = a.nrows();
        let s = 10;
        let scaled = Mat::from_fn(n, n, |i, j| a[(i, j)] / 2f64.powi(s));
        let mut term = Mat::<C64>::identity(n, n);
        let mut sum = Mat::<C64>::identity(n, n);
        for k in 1..30 {
            term = product(term.as_ref(), scaled.as_ref());
            term = Mat::from_fn(n, n, |i, j| term[(i, j)] / k as f64);
            sum = Mat::from_fn(n, n, |i, j| sum[(i, j)] + term[(i, j)]);
        }
        for _ in 0..s {
            sum = product(sum.as_ref(), sum.as_ref());
        }
        sum
    }

    fn max_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m = m.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        m
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let n = 7;
        let a = Mat::from_fn(n, n, |i, j| {
            C64::new(((i * 3 + j * 5) % 7) as f64 - 3.0, ((i + 2 * j) % 5) as f64 - 2.0) * 0.8
        });
        let e = expm(a.as_ref());
        let t = taylor_expm(a.as_ref());
        let scale = (0..n).map(|i| (0..n).map(|j| t[(i, j)].norm()).fold(0.0, f64::max)).fold(0.0, f64::max);
        assert!(max_diff(&e, &t) / scale < 1e-10);
    }

    #[test]
    fn expm_of_diagonal() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { C64::new(-(i as f64), 0.5) } else { ZERO });
        let e = expm(a.as_ref());
        for i in 0..3 {
            let expected = C64::new(-(i as f64), 0.5).exp();
            assert!((e[(i, i)] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn unitary_from_hermitian_generator() {
        let s = HilbertSpec::rabi(6).unwrap();
        let (c, cd) = build_ladder(s);
        let x = build_pauli(s, Pauli::X).unwrap();
        let h = cd.mul(&c).unwrap().add(&c.add(&cd).unwrap().mul(&x).unwrap()).unwrap();
        let blocks = connected_blocks(s.dim(), &[&h]);
        assert_eq!(blocks.len(), 2, "parity splits the Rabi space in two");
        let u = BlockDense::exp_of(&h, C64::new(0.0, -0.3), &blocks).to_dense();
        let uu = product(u.as_ref(), u.adjoint().to_owned().as_ref());
        assert!(max_diff(&uu, &Mat::identity(s.dim(), s.dim())) < 1e-12);
    }

    #[test]
    fn block_apply_matches_dense() {
        let s = HilbertSpec::rabi(4).unwrap();
        let (c, cd) = build_ladder(s);
        let x = build_pauli(s, Pauli::X).unwrap();
        let g = c.add(&cd).unwrap().mul(&x).unwrap();
        let blocks = connected_blocks(s.dim(), &[&g]);
        let u = BlockDense::exp_of(&g, C64::new(0.1, -0.7), &blocks);
        let dense = u.to_dense();
        let v: Vec<C64> = (0..s.dim()).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let mut out = vec![ZERO; s.dim()];
        u.apply(&v, &mut out, &mut Vec::new());
        for i in 0..s.dim() {
            let mut acc = ZERO;
            for j in 0..s.dim() {
                acc += dense[(i, j)] * v[j];
            }
            assert!((acc - out[i]).norm() < 1e-12);
        }
        let rho = Mat::from_fn(s.dim(), s.dim(), |i, j| v[i] * v[j].conj());
        let mut sandwiched = Mat::zeros(s.dim(), s.dim());
        u.sandwich(&rho, &mut sandwiched);
        let reference = product(product(dense.as_ref(), rho.as_ref()).as_ref(), dense.adjoint().to_owned().as_ref());
        assert!(max_diff(&sandwiched, &reference) < 1e-10);
    }
}
