use faer::Mat;
use num_complex::Complex64 as C64;

use super::space::HilbertSpec;
use super::sparse::SparseOperator;
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const IMAG_RESIDUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum Amplitudes {
    Pure(Vec<C64>),
    Density(Mat<C64>),
}

/// Possibly unnormalized state. `norm_log` accumulates the log of every
/// normalization factor divided out, so `norm_log + ln(norm)` is the log of
/// the norm (pure) or trace (density) of the unnormalized conditional state.
#[derive(Debug, Clone)]
pub struct QuantumState {
    space: HilbertSpec,
    amplitudes: Amplitudes,
    norm_log: f64,
}

impl QuantumState {
    pub fn pure(space: HilbertSpec, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: amplitudes.len() });
        }
        Ok(Self { space, amplitudes: Amplitudes::Pure(amplitudes), norm_log: 0.0 })
    }

    pub fn density(space: HilbertSpec, rho: Mat<C64>) -> Result<Self> {
        if rho.nrows() != space.dim() || rho.ncols() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: rho.nrows() });
        }
        Ok(Self { space, amplitudes: Amplitudes::Density(rho), norm_log: 0.0 })
    }

    pub fn basis(space: HilbertSpec, index: usize) -> Self {
        let mut v = vec![ZERO; space.dim()];
        v[index] = C64::new(1.0, 0.0);
        Self { space, amplitudes: Amplitudes::Pure(v), norm_log: 0.0 }
    }

    /// Fock state `|n>` with the qubit down and the ancilla in `g`.
    pub fn fock(space: HilbertSpec, n: usize) -> Result<Self> {
        if n >= space.fock_dim() {
            return Err(Error::Config(format!("Fock level {n} outside truncation {}", space.fock_dim())));
        }
        let q = if space.has_system_qubit() { super::space::QUBIT_DOWN } else { 0 };
        Ok(Self::basis(space, space.index(n, q, 0)))
    }

    pub fn ground(space: HilbertSpec) -> Self {
        Self::basis(space, space.ground_index())
    }

    pub fn space(&self) -> HilbertSpec {
        self.space
    }

    pub fn amplitudes(&self) -> &Amplitudes {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut Amplitudes {
        &mut self.amplitudes
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.amplitudes, Amplitudes::Pure(_))
    }

    pub fn norm_log(&self) -> f64 {
        self.norm_log
    }

    pub fn add_norm_log(&mut self, delta: f64) {
        self.norm_log += delta;
    }

    /// `<psi|psi>` or `tr rho` of the stored (not accumulated) object.
    pub fn raw_norm(&self) -> f64 {
        match &self.amplitudes {
            Amplitudes::Pure(v) => v.iter().map(|a| a.norm_sqr()).sum(),
            Amplitudes::Density(m) => (0..m.nrows()).map(|i| m[(i, i)].re).sum(),
        }
    }

    /// Log of the norm/trace of the full unnormalized state.
    pub fn log_norm(&self) -> f64 {
        self.norm_log + self.raw_norm().ln()
    }

    /// Divides out the stored norm, moving it into `norm_log`.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.raw_norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateState);
        }
        match &mut self.amplitudes {
            Amplitudes::Pure(v) => {
                let s = 1.0 / n.sqrt();
                v.iter_mut().for_each(|a| *a *= s);
            }
            Amplitudes::Density(m) => {
                let s = 1.0 / n;
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        m[(i, j)] *= s;
                    }
                }
            }
        }
        self.norm_log += n.ln();
        Ok(())
    }

    /// Unit-norm (or unit-trace) copy.
    pub fn physical(&self) -> Result<Self> {
        let mut s = self.clone();
        s.normalize()?;
        Ok(s)
    }

    pub fn to_density(&self) -> Self {
        match &self.amplitudes {
            Amplitudes::Density(_) => self.clone(),
            Amplitudes::Pure(v) => Self {
                space: self.space,
                amplitudes: Amplitudes::Density(Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())),
                norm_log: self.norm_log,
            },
        }
    }

    /// Normalized population of each basis state.
    pub fn populations(&self) -> Vec<f64> {
        let n = self.raw_norm();
        match &self.amplitudes {
            Amplitudes::Pure(v) => v.iter().map(|a| a.norm_sqr() / n).collect(),
            Amplitudes::Density(m) => (0..m.nrows()).map(|i| m[(i, i)].re / n).collect(),
        }
    }

    /// Normalized population of the top Fock level.
    pub fn top_fock_population(&self) -> f64 {
        let p = self.populations();
        self.space.top_fock_indices().iter().map(|&i| p[i]).sum()
    }

    /// Largest deviation from hermiticity relative to the trace (density only).
    pub fn hermiticity_deviation(&self) -> f64 {
        match &self.amplitudes {
            Amplitudes::Pure(_) => 0.0,
            Amplitudes::Density(m) => {
                let tr = self.raw_norm().abs().max(f64::MIN_POSITIVE);
                let mut d: f64 = 0.0;
                for i in 0..m.nrows() {
                    for j in 0..=i {
                        d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
                    }
                }
                d / tr
            }
        }
    }

    /// Smallest eigenvalue of the normalized density matrix.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let s = self.physical()?.to_density();
        let Amplitudes::Density(m) = &s.amplitudes else { unreachable!() };
        let h = Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
        let ev = h
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        Ok(ev.into_iter().fold(f64::INFINITY, f64::min))
    }
}

/// Normalized expectation value `tr(rho A)/tr(rho)` or `<psi|A|psi>/<psi|psi>`.
///
/// For operators flagged hermitian the imaginary residue is checked and
/// dropped.
pub fn expectation(state: &QuantumState, op: &SparseOperator) -> Result<C64> {
    if op.dim() != state.space.dim() {
        return Err(Error::DimensionMismatch { expected: state.space.dim(), found: op.dim() });
    }
    let norm = state.raw_norm();
    if !(norm > 0.0) {
        return Err(Error::DegenerateState);
    }
    let value = match &state.amplitudes {
        Amplitudes::Pure(v) => {
            let mut acc = ZERO;
            for r in 0..op.dim() {
                if v[r] == ZERO {
                    continue;
                }
                let mut row = ZERO;
                for (c, a) in op.row(r) {
                    row += a * v[c];
                }
                acc += v[r].conj() * row;
            }
            acc / norm
        }
        Amplitudes::Density(m) => {
            let mut acc = ZERO;
            for (r, c, a) in op.iter() {
                acc += a * m[(c, r)];
            }
            acc / norm
        }
    };
    if op.is_hermitian() {
        if value.im.abs() > IMAG_RESIDUE_TOL * value.re.abs().max(1.0) {
            return Err(Error::ImaginaryResidue(value.im));
        }
        return Ok(C64::new(value.re, 0.0));
    }
    Ok(value)
}

/// Real part of a hermitian expectation value.
pub fn expectation_real(state: &QuantumState, op: &SparseOperator) -> Result<f64> {
    expectation(state, op).map(|v| v.re)
}
