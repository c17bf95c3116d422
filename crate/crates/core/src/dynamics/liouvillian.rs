//! Lindblad superoperator on the density-matrix entries reachable from an
//! initial support, with exact, explicit and implicit propagators and a
//! direct steady-state solver.

use std::collections::VecDeque;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64 as C64;

use super::model::LindbladModel;
use crate::error::{Error, Result};
use crate::quantum::dense::expm;
use crate::quantum::{Amplitudes, HilbertSpec, QuantumState, SparseOperator};

const ZERO: C64 = C64::new(0.0, 0.0);
const MISSING: u32 = u32::MAX;
const SDIRK_GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

/// Default truncation-leakage tolerance on the top Fock population.
pub const LEAK_TOL: f64 = 1e-5;
/// Largest Hilbert dimension handled by the direct steady-state solve.
pub const DIRECT_STEADY_LIMIT: usize = 2000;
/// Residual required of a steady state.
pub const STEADY_RESIDUAL: f64 = 1e-8;

/// Superoperator in CSR form over the reachable pairs `(i, j)` of `rho_ij`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    space: HilbertSpec,
    pairs: Vec<(u32, u32)>,
    lookup: Vec<u32>,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<C64>,
}

impl Liouvillian {
    /// Restricts to entries reachable from the support of `seeds`.
    pub fn build(model: &LindbladModel, seeds: &[(usize, usize)]) -> Result<Self> {
        let space = model.space();
        let dim = space.dim();
        let k = model.effective_generator()?;
        let kd = k.adjoint();
        let jumps: Vec<(f64, SparseOperator)> =
            model.active_channels().map(|(_, c)| (c.rate, c.op.adjoint())).collect();

        let mut lookup = vec![MISSING; dim * dim];
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        let mut queue = VecDeque::new();
        let mut visit = |i: usize, j: usize, pairs: &mut Vec<(u32, u32)>, queue: &mut VecDeque<usize>| -> usize {
            let slot = &mut lookup[i * dim + j];
            if *slot == MISSING {
                *slot = pairs.len() as u32;
                pairs.push((i as u32, j as u32));
                queue.push_back(pairs.len() - 1);
            }
            *slot as usize
        };
        for &(i, j) in seeds {
            visit(i, j, &mut pairs, &mut queue);
            visit(j, i, &mut pairs, &mut queue);
        }
        // (target, source, value)
        let mut triplets: Vec<(usize, usize, C64)> = Vec::new();
        while let Some(src) = queue.pop_front() {
            let (i, j) = (pairs[src].0 as usize, pairs[src].1 as usize);
            // (K rho)_kj = K_ki rho_ij; iterate column i of K via row i of K^dag.
            for (kk, v) in kd.row(i) {
                let t = visit(kk, j, &mut pairs, &mut queue);
                triplets.push((t, src, v.conj()));
            }
            // (rho K^dag)_ik = rho_ij (K^dag)_jk
            for (kk, v) in kd.row(j) {
                let t = visit(i, kk, &mut pairs, &mut queue);
                triplets.push((t, src, v));
            }
            // rate L rho L^dag: L_ki rho_ij conj(L_lj)
            for (rate, ld) in &jumps {
                for (kk, a) in ld.row(i) {
                    for (ll, b) in ld.row(j) {
                        let t = visit(kk, ll, &mut pairs, &mut queue);
                        triplets.push((t, src, a.conj() * b * *rate));
                    }
                }
            }
        }
        let n = pairs.len();
        triplets.sort_unstable_by_key(|&(t, s, _)| (t, s));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last = (usize::MAX, usize::MAX);
        for (t, s, v) in triplets {
            if (t, s) == last {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(s as u32);
                values.push(v);
                row_ptr[t + 1] = col_idx.len();
                last = (t, s);
            }
        }
        for r in 1..=n {
            row_ptr[r] = row_ptr[r].max(row_ptr[r - 1]);
        }
        Ok(Self { space, pairs, lookup, row_ptr, col_idx, values })
    }

    /// Reachable set of the support of `state`.
    pub fn for_state(model: &LindbladModel, state: &QuantumState) -> Result<Self> {
        Self::build(model, &support_pairs(state))
    }

    pub fn space(&self) -> HilbertSpec {
        self.space
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|&(i, j)| (i as usize, j as usize))
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let v = self.lookup[i * self.space.dim() + j];
        (v != MISSING).then_some(v as usize)
    }

    /// `out = L x`
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            *o = acc;
        }
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.len())
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.values[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Weights `w` with `tr(A rho) = sum_u w_u x_u`.
    pub fn observable(&self, op: &SparseOperator) -> Vec<C64> {
        self.pairs().map(|(i, j)| op.get(j, i)).collect()
    }

    pub fn trace_weights(&self) -> Vec<C64> {
        self.pairs().map(|(i, j)| if i == j { C64::new(1.0, 0.0) } else { ZERO }).collect()
    }

    /// Reduced vector of a state whose support lies in the reachable set.
    pub fn vectorize(&self, state: &QuantumState) -> Result<Vec<C64>> {
        let dim = self.space.dim();
        let entry = |i: usize, j: usize| -> C64 {
            match state.amplitudes() {
                Amplitudes::Pure(v) => v[i] * v[j].conj(),
                Amplitudes::Density(m) => m[(i, j)],
            }
        };
        let mut mass_outside = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                if self.lookup[i * dim + j] == MISSING {
                    mass_outside += entry(i, j).norm();
                }
            }
        }
        if mass_outside > 0.0 {
            return Err(Error::Config("state has support outside the reachable set".into()));
        }
        Ok(self.pairs().map(|(i, j)| entry(i, j)).collect())
    }

    pub fn to_state(&self, x: &[C64]) -> QuantumState {
        let dim = self.space.dim();
        let mut m = Mat::<C64>::zeros(dim, dim);
        for ((i, j), v) in self.pairs().zip(x) {
            m[(i, j)] = *v;
        }
        QuantumState::density(self.space, m).expect("dimension matches by construction")
    }

    fn sparse_matrix(&self, diag_shift: C64, scale: C64, replace_row: Option<usize>) -> Result<SparseColMat<usize, C64>> {
        let n = self.len();
        let mut trip = Vec::with_capacity(self.nnz() + n);
        for r in 0..n {
            if Some(r) == replace_row {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                trip.push(Triplet::new(r, self.col_idx[k] as usize, self.values[k] * scale));
            }
            if diag_shift != ZERO {
                trip.push(Triplet::new(r, r, diag_shift));
            }
        }
        if let Some(row) = replace_row {
            for (u, (i, j)) in self.pairs().enumerate() {
                if i == j {
                    trip.push(Triplet::new(row, u, C64::new(1.0, 0.0)));
                }
            }
        }
        SparseColMat::try_new_from_triplets(n, n, &trip).map_err(|e| Error::Solver(format!("{e:?}")))
    }
}

/// Pairs `(i, j)` where the state has a non-zero entry.
pub fn support_pairs(state: &QuantumState) -> Vec<(usize, usize)> {
    let dim = state.space().dim();
    match state.amplitudes() {
        Amplitudes::Pure(v) => {
            let nz: Vec<usize> = (0..dim).filter(|&i| v[i] != ZERO).collect();
            nz.iter().flat_map(|&i| nz.iter().map(move |&j| (i, j))).collect()
        }
        Amplitudes::Density(m) => (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != ZERO)
            .collect(),
    }
}

fn dot(w: &[C64], x: &[C64]) -> C64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Time-stepping scheme for [`evolve_lindblad_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Exact propagator for small reduced systems, otherwise RK4 or, when RK4
    /// would need more than [`EvolveOptions::max_explicit_substeps`] substeps,
    /// the implicit scheme.
    Auto,
    /// Dense exponential of the reduced superoperator.
    Expm,
    /// Classical RK4 with substeps `h <= 1 / gershgorin_bound`, half the stability limit.
    Rk4,
    /// Two-stage L-stable SDIRK (order 2), suited to stiff ancilla rates.
    Implicit,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub integrator: Integrator,
    /// Substeps per output interval for the implicit scheme.
    pub implicit_substeps: usize,
    pub max_explicit_substeps: usize,
    /// Reduced sizes up to this use the exact propagator under `Auto`.
    pub dense_limit: usize,
    pub leak_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { integrator: Integrator::Auto, implicit_substeps: 1, max_explicit_substeps: 64, dense_limit: 600, leak_tol: LEAK_TOL }
    }
}

enum Stepper {
    Exact(Mat<C64>),
    Rk4 { substeps: usize, h: f64 },
    Implicit { lu: faer::sparse::linalg::solvers::Lu<usize, C64>, substeps: usize, h: f64 },
}

struct Propagator<'a> {
    liou: &'a Liouvillian,
    stepper: Stepper,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl<'a> Propagator<'a> {
    fn new(liou: &'a Liouvillian, dt: f64, opts: &EvolveOptions) -> Result<Self> {
        let n = liou.len();
        let gersh = liou.gershgorin_bound();
        let rk_substeps = ((dt * gersh).ceil() as usize).max(1);
        let choice = match opts.integrator {
            Integrator::Auto if n <= opts.dense_limit => Integrator::Expm,
            Integrator::Auto if rk_substeps <= opts.max_explicit_substeps => Integrator::Rk4,
            Integrator::Auto => Integrator::Implicit,
            other => other,
        };
        let stepper = match choice {
            Integrator::Expm => {
                let mut g = Mat::<C64>::zeros(n, n);
                for r in 0..n {
                    for k in liou.row_ptr[r]..liou.row_ptr[r + 1] {
                        g[(r, liou.col_idx[k] as usize)] = liou.values[k] * dt;
                    }
                }
                Stepper::Exact(expm(g.as_ref()))
            }
            Integrator::Rk4 => Stepper::Rk4 { substeps: rk_substeps, h: dt / rk_substeps as f64 },
            Integrator::Implicit | Integrator::Auto => {
                let substeps = opts.implicit_substeps.max(1);
                let h = dt / substeps as f64;
                let a = liou.sparse_matrix(C64::new(1.0, 0.0), C64::new(-SDIRK_GAMMA * h, 0.0), None)?;
                let lu = a.sp_lu().map_err(|e| Error::Solver(format!("{e:?}")))?;
                Stepper::Implicit { lu, substeps, h }
            }
        };
        Ok(Self { liou, stepper, k: std::array::from_fn(|_| vec![ZERO; n]), tmp: vec![ZERO; n] })
    }

    fn step(&mut self, x: &mut [C64]) {
        let n = x.len();
        match &self.stepper {
            Stepper::Exact(p) => {
                for (r, t) in self.tmp.iter_mut().enumerate() {
                    let mut acc = ZERO;
                    for c in 0..n {
                        acc += p[(r, c)] * x[c];
                    }
                    *t = acc;
                }
                x.copy_from_slice(&self.tmp);
            }
            Stepper::Rk4 { substeps, h } => {
                let h = *h;
                for _ in 0..*substeps {
                    let [k1, k2, k3, k4] = &mut self.k;
                    self.liou.apply(x, k1);
                    for i in 0..n {
                        self.tmp[i] = x[i] + k1[i] * (h / 2.0);
                    }
                    self.liou.apply(&self.tmp, k2);
                    for i in 0..n {
                        self.tmp[i] = x[i] + k2[i] * (h / 2.0);
                    }
                    self.liou.apply(&self.tmp, k3);
                    for i in 0..n {
                        self.tmp[i] = x[i] + k3[i] * h;
                    }
                    self.liou.apply(&self.tmp, k4);
                    for i in 0..n {
                        x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                    }
                }
            }
            Stepper::Implicit { lu, substeps, h } => {
                let h = *h;
                let mut rhs = Mat::<C64>::zeros(n, 1);
                for _ in 0..*substeps {
                    for i in 0..n {
                        rhs[(i, 0)] = x[i];
                    }
                    lu.solve_in_place(rhs.as_mut());
                    let y1: Vec<C64> = (0..n).map(|i| rhs[(i, 0)]).collect();
                    self.liou.apply(&y1, &mut self.tmp);
                    for i in 0..n {
                        rhs[(i, 0)] = x[i] + self.tmp[i] * ((1.0 - SDIRK_GAMMA) * h);
                    }
                    lu.solve_in_place(rhs.as_mut());
                    for i in 0..n {
                        x[i] = rhs[(i, 0)];
                    }
                }
            }
        }
    }
}

/// Density matrix in reduced form, as handed to evolution observers.
pub struct ReducedState<'a> {
    liou: &'a Liouvillian,
    x: &'a [C64],
}

impl ReducedState<'_> {
    pub fn expectation(&self, weights: &[C64]) -> C64 {
        dot(weights, self.x)
    }

    pub fn vector(&self) -> &[C64] {
        self.x
    }

    pub fn to_state(&self) -> QuantumState {
        self.liou.to_state(self.x)
    }
}

/// Output grid `0, dt, 2 dt, ..., t_final`.
pub fn output_steps(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::Config(format!("need dt > 0 and t_final >= 0, got dt = {dt}, t_final = {t_final}")));
    }
    Ok((t_final / dt).round() as usize)
}

/// Integrates the master equation, calling `observer` at every output time.
///
/// `dt` is the output interval; internal substeps are chosen by the
/// integrator. Aborts with [`Error::Leakage`] when the top Fock population
/// exceeds `opts.leak_tol`.
pub fn evolve_lindblad_with<F>(
    model: &LindbladModel,
    initial: &QuantumState,
    t_final: f64,
    dt: f64,
    opts: &EvolveOptions,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(f64, &ReducedState<'_>) -> Result<()>,
{
    let steps = output_steps(t_final, dt)?;
    let initial = initial.physical()?;
    let liou = Liouvillian::for_state(model, &initial)?;
    let mut x = liou.vectorize(&initial)?;
    let leak = liou.observable(&crate::quantum::top_fock_projector(liou.space()));
    let mut prop = Propagator::new(&liou, dt, opts)?;
    for s in 0..=steps {
        let t = s as f64 * dt;
        if s > 0 {
            prop.step(&mut x);
        }
        let p = dot(&leak, &x).re;
        if p > opts.leak_tol {
            return Err(Error::Leakage { population: p, tolerance: opts.leak_tol, time: t });
        }
        observer(t, &ReducedState { liou: &liou, x: &x })?;
    }
    Ok(())
}

/// Full states on the output grid.
pub fn evolve_lindblad(
    model: &LindbladModel,
    initial: &QuantumState,
    t_final: f64,
    dt: f64,
) -> Result<Vec<(f64, QuantumState)>> {
    let mut out = Vec::new();
    evolve_lindblad_with(model, initial, t_final, dt, &EvolveOptions::default(), |t, s| {
        out.push((t, s.to_state()));
        Ok(())
    })?;
    Ok(out)
}

/// Expectation values of hermitian `ops` on the output grid.
#[derive(Debug, Clone)]
pub struct Expectations {
    pub times: Vec<f64>,
    /// `values[k][s]` is `<ops[k]>` at `times[s]`.
    pub values: Vec<Vec<f64>>,
}

pub fn evolve_expectations(
    model: &LindbladModel,
    initial: &QuantumState,
    t_final: f64,
    dt: f64,
    ops: &[&SparseOperator],
    opts: &EvolveOptions,
) -> Result<Expectations> {
    let mut weights: Option<Vec<Vec<C64>>> = None;
    let mut times = Vec::new();
    let mut values = vec![Vec::new(); ops.len()];
    evolve_lindblad_with(model, initial, t_final, dt, opts, |t, s| {
        let w = weights.get_or_insert_with(|| ops.iter().map(|op| s.liou.observable(op)).collect());
        let tr = s.expectation(&s.liou.trace_weights()).re;
        times.push(t);
        for (k, wk) in w.iter().enumerate() {
            values[k].push(s.expectation(wk).re / tr);
        }
        Ok(())
    })?;
    Ok(Expectations { times, values })
}

/// Largest change in `<op>` on the output grid when the internal step is halved.
pub fn step_doubling_error(
    model: &LindbladModel,
    initial: &QuantumState,
    t_final: f64,
    dt: f64,
    op: &SparseOperator,
    opts: &EvolveOptions,
) -> Result<f64> {
    let coarse = evolve_expectations(model, initial, t_final, dt, &[op], opts)?;
    let mut fine_opts = *opts;
    fine_opts.implicit_substeps = opts.implicit_substeps.max(1) * 2;
    let fine = match opts.integrator {
        Integrator::Implicit => evolve_expectations(model, initial, t_final, dt, &[op], &fine_opts)?,
        _ => {
            let f = evolve_expectations(model, initial, t_final, dt / 2.0, &[op], &fine_opts)?;
            Expectations { times: f.times.iter().step_by(2).copied().collect(), values: vec![f.values[0].iter().step_by(2).copied().collect()] }
        }
    };
    Ok(coarse.values[0].iter().zip(&fine.values[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Unique stationary state, solved directly on the entries reachable from the
/// ground state. The residual `max |L rho|` must fall below [`STEADY_RESIDUAL`].
pub fn steady_state(model: &LindbladModel) -> Result<QuantumState> {
    let space = model.space();
    let g = space.ground_index();
    let liou = Liouvillian::build(model, &[(g, g)])?;
    let x = if space.dim() <= DIRECT_STEADY_LIMIT {
        let row = liou.index_of(g, g).expect("ground pair seeds the set");
        let a = liou.sparse_matrix(ZERO, C64::new(1.0, 0.0), Some(row))?;
        let lu = a.sp_lu().map_err(|e| Error::Solver(format!("{e:?}")))?;
        let mut rhs = Mat::<C64>::zeros(liou.len(), 1);
        rhs[(row, 0)] = C64::new(1.0, 0.0);
        lu.solve_in_place(rhs.as_mut());
        (0..liou.len()).map(|i| rhs[(i, 0)]).collect::<Vec<_>>()
    } else {
        relax_to_steady_state(&liou)?
    };
    let residual = steady_residual(&liou, &x);
    if !(residual < STEADY_RESIDUAL) {
        return Err(Error::SteadyStateNotConverged { residual });
    }
    let mut state = liou.to_state(&x);
    state.normalize()?;
    Ok(state)
}

fn steady_residual(liou: &Liouvillian, x: &[C64]) -> f64 {
    let mut r = vec![ZERO; x.len()];
    liou.apply(x, &mut r);
    r.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn relax_to_steady_state(liou: &Liouvillian) -> Result<Vec<C64>> {
    let g = liou.space().ground_index();
    let mut x = vec![ZERO; liou.len()];
    x[liou.index_of(g, g).expect("ground pair seeds the set")] = C64::new(1.0, 0.0);
    let h = 2.0 / liou.gershgorin_bound().max(f64::MIN_POSITIVE);
    let opts = EvolveOptions { integrator: Integrator::Rk4, ..Default::default() };
    let mut prop = Propagator::new(liou, 100.0 * h, &opts)?;
    let mut residual = f64::INFINITY;
    for _ in 0..100_000 {
        prop.step(&mut x);
        residual = steady_residual(liou, &x);
        if residual < STEADY_RESIDUAL {
            return Ok(x);
        }
    }
    Err(Error::SteadyStateNotConverged { residual })
}
