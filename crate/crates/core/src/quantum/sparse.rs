use num_complex::Complex64 as C64;

use super::space::HilbertSpec;
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// Square complex operator in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    space: HilbertSpec,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
    hermitian: bool,
}

/// Operator on a single tensor factor, as `(row, col, value)` entries.
#[derive(Debug, Clone, Default)]
pub struct LocalOp {
    entries: Vec<(usize, usize, C64)>,
}

impl LocalOp {
    pub fn new(entries: Vec<(usize, usize, C64)>) -> Self {
        Self { entries }
    }

    /// `|row><col|`
    pub fn transition(row: usize, col: usize) -> Self {
        Self::new(vec![(row, col, C64::new(1.0, 0.0))])
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::new(values.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))).collect())
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }
}

impl SparseOperator {
    /// Builds from unsorted triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(space: HilbertSpec, mut triplets: Vec<(usize, usize, C64)>) -> Result<Self> {
        let dim = space.dim();
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= dim || *c >= dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: r.max(c) + 1 });
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut op = Self { space, row_ptr, col_idx, values, hermitian: false };
        op.prune();
        Ok(op)
    }

    pub fn zeros(space: HilbertSpec) -> Self {
        Self {
            space,
            row_ptr: vec![0; space.dim() + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(space: HilbertSpec) -> Self {
        let dim = space.dim();
        Self {
            space,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![C64::new(1.0, 0.0); dim],
            hermitian: true,
        }
    }

    /// Tensor product of local factors; `None` means identity on that factor.
    pub fn product(
        space: HilbertSpec,
        phonon: Option<&LocalOp>,
        qubit: Option<&LocalOp>,
        ancilla: Option<&LocalOp>,
    ) -> Result<Self> {
        if qubit.is_some() && !space.has_system_qubit() {
            return Err(Error::Config("operator acts on the system qubit but the space has none".into()));
        }
        if ancilla.is_some() && !space.has_ancilla() {
            return Err(Error::Config("operator acts on the ancilla but the space has none".into()));
        }
        let expand = |op: Option<&LocalOp>, dim: usize| -> Result<Vec<(usize, usize, C64)>> {
            match op {
                None => Ok((0..dim).map(|i| (i, i, C64::new(1.0, 0.0))).collect()),
                Some(op) => {
                    if op.entries.iter().any(|&(r, c, _)| r >= dim || c >= dim) {
                        return Err(Error::DimensionMismatch { expected: dim, found: dim + 1 });
                    }
                    Ok(op.entries.clone())
                }
            }
        };
        let ph = expand(phonon, space.fock_dim())?;
        let qu = expand(qubit, space.qubit_dim())?;
        let an = expand(ancilla, space.ancilla_dim())?;
        let mut triplets = Vec::with_capacity(ph.len() * qu.len() * an.len());
        for &(pr, pc, pv) in &ph {
            for &(qr, qc, qv) in &qu {
                for &(ar, ac, av) in &an {
                    triplets.push((space.index(pr, qr, ar), space.index(pc, qc, ac), pv * qv * av));
                }
            }
        }
        Self::from_triplets(space, triplets)
    }

    fn prune(&mut self) {
        let dim = self.dim();
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != C64::new(0.0, 0.0) {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    pub fn space(&self) -> HilbertSpec {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Sets the hermiticity flag after verifying `max|A - A^dag| < 1e-12`.
    pub fn mark_hermitian(mut self) -> Result<Self> {
        let dev = self.hermiticity_deviation();
        if dev >= HERMITIAN_TOL {
            return Err(Error::Config(format!("operator is not hermitian (deviation {dev:e})")));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.sub(&self.adjoint()).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(j, _)| j == c).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        let triplets = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        let mut out = Self::from_triplets(self.space, triplets).expect("same space");
        out.hermitian = self.hermitian;
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.hermitian = self.hermitian && factor.im == 0.0;
        out.prune();
        out
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// `self + factor * other`
    pub fn add_scaled(&self, other: &Self, factor: C64) -> Result<Self> {
        self.check_same_space(other)?;
        let triplets = self.iter().chain(other.iter().map(|(r, c, v)| (r, c, v * factor))).collect();
        let mut out = Self::from_triplets(self.space, triplets)?;
        out.hermitian = self.hermitian && other.hermitian && factor.im == 0.0;
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, C64::new(-1.0, 0.0))
    }

    /// Operator product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        let mut triplets = Vec::new();
        for r in 0..self.dim() {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.space, triplets)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// `out = A x`
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply(x, &mut out);
        out
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut m = vec![vec![C64::new(0.0, 0.0); self.dim()]; self.dim()];
        for (r, c, v) in self.iter() {
            m[r][c] += v;
        }
        m
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Annihilation and creation operators of the phonon mode, identity elsewhere.
pub fn build_ladder(space: HilbertSpec) -> (SparseOperator, SparseOperator) {
    let entries = (1..space.fock_dim()).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))).collect();
    let c = SparseOperator::product(space, Some(&LocalOp::new(entries)), None, None)
        .expect("ladder fits any valid space");
    let cdag = c.adjoint();
    (c, cdag)
}

/// Number operator `c^dag c`.
pub fn number_operator(space: HilbertSpec) -> SparseOperator {
    let diag: Vec<f64> = (0..space.fock_dim()).map(|n| n as f64).collect();
    let mut op = SparseOperator::product(space, Some(&LocalOp::diagonal(&diag)), None, None)
        .expect("number operator fits any valid space");
    op.hermitian = true;
    op
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Pauli matrix on the system qubit, in the basis `(|up>, |down>)`.
pub fn build_pauli(space: HilbertSpec, which: Pauli) -> Result<SparseOperator> {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let local = match which {
        Pauli::X => LocalOp::new(vec![(0, 1, one), (1, 0, one)]),
        Pauli::Y => LocalOp::new(vec![(0, 1, -i), (1, 0, i)]),
        Pauli::Z => LocalOp::diagonal(&[1.0, -1.0]),
    };
    let mut op = SparseOperator::product(space, None, Some(&local), None)?;
    op.hermitian = true;
    Ok(op)
}

/// Ancilla operator `|row><col|`, identity on the mode and qubit.
pub fn ancilla_transition(space: HilbertSpec, row: usize, col: usize) -> Result<SparseOperator> {
    let mut op = SparseOperator::product(space, None, None, Some(&LocalOp::transition(row, col)))?;
    op.hermitian = row == col;
    Ok(op)
}

/// Projector onto the top Fock level.
pub fn top_fock_projector(space: HilbertSpec) -> SparseOperator {
    let top = space.fock_dim() - 1;
    let mut op = SparseOperator::product(space, Some(&LocalOp::transition(top, top)), None, None)
        .expect("projector fits any valid space");
    op.hermitian = true;
    op
}
