//! Photon-counting unraveling on a fixed time grid.
//!
//! Each step of length `dt` either records no event or exactly one event on a
//! monitored channel. With `K = -iH - (1/2) sum_k gamma_k L_k^dag L_k` over all
//! active channels, the branches are built from the exact propagators
//! `U = exp(K dt)` and `U_h = exp(K dt / 2)`:
//!
//! * no event: `psi -> U psi`, weight `w_0 = |U psi|^2`;
//! * event on channel `m`: `psi -> U_h L_m U_h psi`, weight
//!   `w_m = gamma_m dt (|L_m psi|^2 + |L_m U psi|^2) / 2`.
//!
//! The branch probability is `w_k / sum_j w_j`, so the probabilities of all
//! records on a grid sum to one exactly and `ln P[D]` is the sum of the logs of
//! the chosen branch probabilities. When some active channel is unmonitored the
//! state is a density matrix and those channels enter through a symmetric
//! splitting `exp(dt/2 R)` (to second order) around both branches, with
//! `R(rho) = sum gamma L rho L^dag` over unmonitored channels.
//!
//! Replays run the same step with the decisions taken from a record, so a
//! replay at the generating parameters reproduces the generation likelihood
//! bit for bit.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{LindbladModel, ModelSpec};
use super::record::{Event, TrajectoryRecord};
use super::LEAK_TOL;
use crate::error::{Error, Result};
use crate::quantum::space::{ANCILLA_D, ANCILLA_E, QUBIT_UP};
use crate::quantum::{connected_blocks, BlockDense, HilbertSpec, QuantumState, SparseOperator};

const ZERO: C64 = C64::new(0.0, 0.0);
const POSITIVITY_TOL: f64 = 1e-6;

/// Per-trajectory random stream: ChaCha8 keyed by the master seed, with the
/// trajectory index as stream number. Independent of scheduling.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub spec: ModelSpec,
    pub dt: f64,
    pub n_steps: u64,
    pub initial_fock: u32,
    /// Observables are sampled every `sample_every` steps (0: start and end only).
    pub sample_every: u64,
    /// Step counts after which `ln P` is recorded.
    pub checkpoints: Vec<u64>,
    pub leak_tol: f64,
    /// Check the smallest eigenvalue of density states at sample steps.
    pub check_positivity: bool,
}

impl TrajectoryConfig {
    pub fn new(spec: ModelSpec, t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Config(format!("t_final must be positive, got {t_final}")));
        }
        let n_steps = (t_final / dt).round().max(1.0) as u64;
        Ok(Self {
            spec,
            dt,
            n_steps,
            initial_fock: 0,
            sample_every: 0,
            checkpoints: vec![n_steps],
            leak_tol: LEAK_TOL,
            check_positivity: false,
        })
    }

    /// Uses the default step `1e-2 / (largest rate)`.
    pub fn with_default_dt(spec: ModelSpec, t_final: f64) -> Result<Self> {
        let dt = super::model::default_dt(&spec.build()?);
        Self::new(spec, t_final, dt)
    }

    pub fn initial_fock(mut self, n: u32) -> Self {
        self.initial_fock = n;
        self
    }

    pub fn sample_every(mut self, every: u64) -> Self {
        self.sample_every = every;
        self
    }

    /// Records `ln P` at the grid steps nearest to the given times.
    pub fn checkpoint_times(mut self, times: &[f64]) -> Result<Self> {
        self.checkpoints = checkpoint_steps(times, self.dt, self.n_steps)?;
        Ok(self)
    }

    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Grid steps for checkpoint times; times must be positive and within the run.
pub fn checkpoint_steps(times: &[f64], dt: f64, n_steps: u64) -> Result<Vec<u64>> {
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        let s = (t / dt).round();
        if !(s >= 1.0) || s as u64 > n_steps {
            return Err(Error::Config(format!("checkpoint t = {t} outside (0, {}]", n_steps as f64 * dt)));
        }
        steps.push(s as u64);
    }
    if steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("checkpoints must be strictly increasing on the grid".into()));
    }
    Ok(steps)
}

/// Normalized conditional expectations sampled along a trajectory. Series that
/// do not apply to the model (no qubit, no ancilla) are empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Samples {
    pub times: Vec<f64>,
    pub n: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub p_e: Vec<f64>,
    pub p_d: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryOutput {
    pub record: TrajectoryRecord,
    /// `ln P[D(t, 0)]` for the whole record.
    pub log_likelihood: f64,
    /// `ln P` at each configured checkpoint.
    pub checkpoint_log_likelihood: Vec<f64>,
    pub samples: Samples,
    /// Largest top-Fock population seen.
    pub leak_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutput {
    pub log_likelihood: f64,
    pub checkpoint_log_likelihood: Vec<f64>,
    pub leak_max: f64,
}

#[derive(Debug, Clone)]
struct Jump {
    channel: u32,
    rate: f64,
    op: SparseOperator,
    ldl: SparseOperator,
}

enum Cond {
    Pure(Vec<C64>),
    Density(Mat<C64>),
}

enum Decision {
    Draw(f64),
    Forced(Option<u32>),
}

struct Work {
    phi: Vec<C64>,
    tmp: Vec<C64>,
    scratch: Vec<C64>,
    weights: Vec<f64>,
}

/// Precomputed step propagators for one model and step size.
pub struct Unraveling {
    spec: ModelSpec,
    space: HilbertSpec,
    dt: f64,
    pure: bool,
    u_half: BlockDense,
    u_full: BlockDense,
    monitored: Vec<Jump>,
    unmonitored: Vec<Jump>,
    diag_n: Vec<f64>,
    diag_sz: Option<Vec<f64>>,
    diag_pe: Option<Vec<f64>>,
    diag_pd: Option<Vec<f64>>,
    top: Vec<usize>,
}

impl Unraveling {
    pub fn new(spec: &ModelSpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let model = spec.build()?;
        Self::from_model(*spec, &model, dt)
    }

    fn from_model(spec: ModelSpec, model: &LindbladModel, dt: f64) -> Result<Self> {
        let space = model.space();
        let k = model.effective_generator()?;
        let partition = connected_blocks(space.dim(), &[&k]);
        let u_half = BlockDense::exp_of(&k, C64::new(0.5 * dt, 0.0), &partition);
        let u_full = BlockDense::exp_of(&k, C64::new(dt, 0.0), &partition);
        let mut monitored = Vec::new();
        let mut unmonitored = Vec::new();
        for (i, ch) in model.active_channels() {
            let j = Jump { channel: i as u32, rate: ch.rate, op: ch.op.clone(), ldl: ch.op.adjoint().mul(&ch.op)? };
            if ch.monitored {
                monitored.push(j);
            } else {
                unmonitored.push(j);
            }
        }
        let dim = space.dim();
        let decomposed: Vec<_> = (0..dim).map(|i| space.decompose(i)).collect();
        let diag_n = decomposed.iter().map(|&(n, _, _)| n as f64).collect();
        let diag_sz = space
            .has_system_qubit()
            .then(|| decomposed.iter().map(|&(_, q, _)| if q == QUBIT_UP { 1.0 } else { -1.0 }).collect());
        let level = |l: usize| -> Option<Vec<f64>> {
            space
                .has_ancilla()
                .then(|| decomposed.iter().map(|&(_, _, a)| if a == l { 1.0 } else { 0.0 }).collect())
        };
        Ok(Self {
            spec,
            space,
            dt,
            pure: unmonitored.is_empty(),
            u_half,
            u_full,
            monitored,
            unmonitored,
            diag_n,
            diag_sz,
            diag_pe: level(ANCILLA_E),
            diag_pd: level(ANCILLA_D),
            top: space.top_fock_indices(),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Whether trajectories are propagated as state vectors.
    pub fn is_pure(&self) -> bool {
        self.pure
    }

    /// Channel ids that can appear in records.
    pub fn monitored_channels(&self) -> Vec<u32> {
        self.monitored.iter().map(|j| j.channel).collect()
    }

    fn initial(&self, fock: u32) -> Result<Cond> {
        let psi = QuantumState::fock(self.space, fock as usize)?;
        let crate::quantum::Amplitudes::Pure(v) = psi.amplitudes() else { unreachable!() };
        if self.pure {
            Ok(Cond::Pure(v.clone()))
        } else {
            Ok(Cond::Density(Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())))
        }
    }

    fn work(&self) -> Work {
        let dim = self.space.dim();
        Work {
            phi: vec![ZERO; dim],
            tmp: vec![ZERO; dim],
            scratch: Vec::new(),
            weights: vec![0.0; self.monitored.len() + 1],
        }
    }

    /// Samples a trajectory with the given random stream.
    pub fn run<R: Rng>(&self, cfg: &TrajectoryConfig, rng: &mut R, master_seed: u64, stream: u64) -> Result<TrajectoryOutput> {
        self.check_config(cfg)?;
        let mut events = Vec::new();
        let mut samples = Samples::default();
        let pass = self.propagate(cfg, |_, _| Decision::Draw(rng.random::<f64>()), &mut events, Some(&mut samples))?;
        let record = TrajectoryRecord {
            spec: self.spec,
            dt: self.dt,
            n_steps: cfg.n_steps,
            initial_fock: cfg.initial_fock,
            master_seed,
            stream,
            events,
        };
        Ok(TrajectoryOutput {
            record,
            log_likelihood: pass.log_likelihood,
            checkpoint_log_likelihood: pass.checkpoint_log_likelihood,
            samples,
            leak_max: pass.leak_max,
        })
    }

    /// Trajectory `index` of the ensemble seeded by `master_seed`.
    pub fn run_seeded(&self, cfg: &TrajectoryConfig, master_seed: u64, index: u64) -> Result<TrajectoryOutput> {
        let mut rng = trajectory_rng(master_seed, index);
        self.run(cfg, &mut rng, master_seed, index)
    }

    /// Re-evaluates `ln P` of a stored record under this unraveling's model,
    /// applying the recorded events and never sampling.
    pub fn replay(&self, record: &TrajectoryRecord, checkpoints: &[u64]) -> Result<ReplayOutput> {
        record.validate()?;
        if record.spec.scheme.code() != self.spec.scheme.code()
            || record.spec.fock_dim != self.spec.fock_dim
            || record.spec.system_qubit != self.spec.system_qubit
        {
            return Err(Error::RecordMismatch("scheme or truncation differs from the replay model".into()));
        }
        if record.dt.to_bits() != self.dt.to_bits() {
            return Err(Error::RecordMismatch(format!("record dt {} differs from {}", record.dt, self.dt)));
        }
        let cfg = TrajectoryConfig {
            spec: self.spec,
            dt: self.dt,
            n_steps: record.n_steps,
            initial_fock: record.initial_fock,
            sample_every: 0,
            checkpoints: checkpoints.to_vec(),
            leak_tol: LEAK_TOL,
            check_positivity: false,
        };
        self.check_config(&cfg)?;
        let mut cursor = 0usize;
        let events = &record.events;
        let mut sink = Vec::new();
        let pass = self.propagate(
            &cfg,
            |step, _| {
                if cursor < events.len() && events[cursor].step == step {
                    cursor += 1;
                    Decision::Forced(Some(events[cursor - 1].channel))
                } else {
                    Decision::Forced(None)
                }
            },
            &mut sink,
            None,
        )?;
        Ok(ReplayOutput {
            log_likelihood: pass.log_likelihood,
            checkpoint_log_likelihood: pass.checkpoint_log_likelihood,
            leak_max: pass.leak_max,
        })
    }

    fn check_config(&self, cfg: &TrajectoryConfig) -> Result<()> {
        if cfg.spec != self.spec || cfg.dt.to_bits() != self.dt.to_bits() {
            return Err(Error::Config("trajectory config does not match the unraveling".into()));
        }
        if cfg.checkpoints.windows(2).any(|w| w[1] <= w[0]) || cfg.checkpoints.iter().any(|&c| c > cfg.n_steps) {
            return Err(Error::Config("checkpoints must be increasing and within the run".into()));
        }
        if cfg.initial_fock as usize >= self.space.fock_dim() {
            return Err(Error::Config(format!(
                "initial Fock level {} outside truncation {}",
                cfg.initial_fock,
                self.space.fock_dim()
            )));
        }
        Ok(())
    }

    fn propagate<F>(
        &self,
        cfg: &TrajectoryConfig,
        mut decide: F,
        events: &mut Vec<Event>,
        mut samples: Option<&mut Samples>,
    ) -> Result<Pass>
    where
        F: FnMut(u64, &[f64]) -> Decision,
    {
        let mut state = self.initial(cfg.initial_fock)?;
        let mut work = self.work();
        let mut ln_p = 0.0;
        let mut cps = Vec::with_capacity(cfg.checkpoints.len());
        let mut next_cp = 0;
        while next_cp < cfg.checkpoints.len() && cfg.checkpoints[next_cp] == 0 {
            cps.push(0.0);
            next_cp += 1;
        }
        let mut leak_max = self.top_population(&state);
        if let Some(s) = samples.as_deref_mut() {
            self.sample(&state, 0.0, s, cfg.check_positivity)?;
        }
        for step in 0..cfg.n_steps {
            let (event, log_p) = self.step(&mut state, &mut work, &mut decide, step)?;
            ln_p += log_p;
            if let Some(channel) = event {
                events.push(Event { step, channel });
            }
            let done = step + 1;
            let t = done as f64 * self.dt;
            let leak = self.top_population(&state);
            leak_max = leak_max.max(leak);
            if leak > cfg.leak_tol {
                return Err(Error::Leakage { population: leak, tolerance: cfg.leak_tol, time: t });
            }
            while next_cp < cfg.checkpoints.len() && cfg.checkpoints[next_cp] == done {
                cps.push(ln_p);
                next_cp += 1;
            }
            if let Some(s) = samples.as_deref_mut() {
                let at_sample = cfg.sample_every > 0 && done % cfg.sample_every == 0;
                if at_sample || done == cfg.n_steps {
                    self.sample(&state, t, s, cfg.check_positivity)?;
                }
            }
        }
        if !ln_p.is_finite() {
            return Err(Error::DegenerateState);
        }
        Ok(Pass { log_likelihood: ln_p, checkpoint_log_likelihood: cps, leak_max })
    }

    /// One grid step. Returns the recorded channel (if any) and the log of the
    /// chosen branch probability; the state is left normalized.
    fn step<F>(&self, state: &mut Cond, w: &mut Work, decide: &mut F, step: u64) -> Result<(Option<u32>, f64)>
    where
        F: FnMut(u64, &[f64]) -> Decision,
    {
        match state {
            Cond::Pure(psi) => {
                self.u_full.apply(psi, &mut w.phi, &mut w.scratch);
                w.weights[0] = norm_sqr(&w.phi);
                for (k, j) in self.monitored.iter().enumerate() {
                    w.weights[k + 1] = 0.5 * self.dt * j.rate * (sandwich_vec(&j.ldl, psi) + sandwich_vec(&j.ldl, &w.phi));
                }
                let (branch, log_p) = self.choose(decide(step, &w.weights), &w.weights, step)?;
                match branch {
                    0 => std::mem::swap(psi, &mut w.phi),
                    k => {
                        let j = &self.monitored[k - 1];
                        self.u_half.apply(psi, &mut w.tmp, &mut w.scratch);
                        j.op.apply(&w.tmp, &mut w.phi);
                        self.u_half.apply(&w.phi, psi, &mut w.scratch);
                    }
                }
                let n = norm_sqr(psi);
                if !(n > 0.0) || !n.is_finite() {
                    return Err(Error::DegenerateState);
                }
                let s = 1.0 / n.sqrt();
                psi.iter_mut().for_each(|a| *a *= s);
                Ok((branch.checked_sub(1).map(|k| self.monitored[k].channel), log_p))
            }
            Cond::Density(rho) => {
                let no_jump = self.no_jump_density(rho);
                w.weights[0] = trace(&no_jump);
                for (k, j) in self.monitored.iter().enumerate() {
                    w.weights[k + 1] = 0.5 * self.dt * j.rate * (trace_product(&j.ldl, rho) + trace_product(&j.ldl, &no_jump));
                }
                let (branch, log_p) = self.choose(decide(step, &w.weights), &w.weights, step)?;
                *rho = match branch {
                    0 => no_jump,
                    k => self.jump_density(rho, &self.monitored[k - 1]),
                };
                let tr = trace(rho);
                if !(tr > 0.0) || !tr.is_finite() {
                    return Err(Error::DegenerateState);
                }
                scale_mat(rho, 1.0 / tr);
                Ok((branch.checked_sub(1).map(|k| self.monitored[k].channel), log_p))
            }
        }
    }

    fn choose(&self, decision: Decision, weights: &[f64], step: u64) -> Result<(usize, f64)> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateState);
        }
        let branch = match decision {
            Decision::Draw(u) => {
                let target = u * total;
                let mut acc = 0.0;
                let mut chosen = 0;
                for (k, &wk) in weights.iter().enumerate() {
                    acc += wk;
                    if target < acc {
                        chosen = k;
                        break;
                    }
                    chosen = k;
                }
                // Skip zero-weight branches that rounding could select at the end.
                while weights[chosen] <= 0.0 && chosen > 0 {
                    chosen -= 1;
                }
                chosen
            }
            Decision::Forced(None) => 0,
            Decision::Forced(Some(channel)) => {
                let k = self.monitored.iter().position(|j| j.channel == channel).ok_or_else(|| {
                    Error::RecordMismatch(format!("channel {channel} is not an active monitored channel"))
                })?;
                k + 1
            }
        };
        if !(weights[branch] > 0.0) {
            return Err(Error::RecordMismatch(format!("recorded outcome at step {step} has zero probability")));
        }
        Ok((branch, (weights[branch] / total).ln()))
    }

    /// `E(U E(rho) U^dag)` with `E = 1 + (dt/2) R + (dt/2)^2 R^2 / 2`, the
    /// second-order symmetric splitting of the unmonitored jump terms.
    fn no_jump_density(&self, rho: &Mat<C64>) -> Mat<C64> {
        let dim = rho.nrows();
        let y = self.recycle(rho);
        let mut x = Mat::zeros(dim, dim);
        self.u_full.sandwich(&y, &mut x);
        self.recycle(&x)
    }

    fn recycle(&self, rho: &Mat<C64>) -> Mat<C64> {
        if self.unmonitored.is_empty() {
            return rho.clone();
        }
        let h = 0.5 * self.dt;
        let dim = rho.nrows();
        let mut once = Mat::zeros(dim, dim);
        self.add_recycling(rho, &mut once, 1.0);
        let mut out = rho.clone();
        self.add_recycling(&once, &mut out, 0.5 * h * h);
        for c in 0..dim {
            for r in 0..dim {
                out[(r, c)] += once[(r, c)] * h;
            }
        }
        out
    }

    /// `E(U_h L (U_h E(rho) U_h^dag) L^dag U_h^dag)`, the jump at mid-step.
    fn jump_density(&self, rho: &Mat<C64>, j: &Jump) -> Mat<C64> {
        let dim = rho.nrows();
        let mut a = Mat::zeros(dim, dim);
        self.u_half.sandwich(&self.recycle(rho), &mut a);
        let mut b = Mat::zeros(dim, dim);
        add_jump_term(&j.op, &a, &mut b, 1.0);
        let mut c = Mat::zeros(dim, dim);
        self.u_half.sandwich(&b, &mut c);
        self.recycle(&c)
    }

    fn add_recycling(&self, rho: &Mat<C64>, out: &mut Mat<C64>, factor: f64) {
        for j in &self.unmonitored {
            add_jump_term(&j.op, rho, out, factor * j.rate);
        }
    }

    /// Ensemble-averaged one-step map on a density matrix. Averaging the
    /// branches of [`Unraveling::run`] gives exactly this map, which approximates
    /// the master-equation propagator over one step.
    pub fn mean_step(&self, rho: &Mat<C64>) -> Result<Mat<C64>> {
        let no_jump = self.no_jump_density(rho);
        let mut weights = vec![trace(&no_jump)];
        for j in &self.monitored {
            weights.push(0.5 * self.dt * j.rate * (trace_product(&j.ldl, rho) + trace_product(&j.ldl, &no_jump)));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateState);
        }
        let tr_rho = trace(rho);
        let mut out = no_jump;
        scale_mat(&mut out, tr_rho / total);
        for (k, j) in self.monitored.iter().enumerate() {
            if weights[k + 1] <= 0.0 {
                continue;
            }
            let mut jumped = self.jump_density(rho, j);
            let tr = trace(&jumped);
            scale_mat(&mut jumped, tr_rho * weights[k + 1] / (total * tr));
            for c in 0..out.ncols() {
                for r in 0..out.nrows() {
                    out[(r, c)] += jumped[(r, c)];
                }
            }
        }
        Ok(out)
    }

    fn top_population(&self, state: &Cond) -> f64 {
        match state {
            Cond::Pure(psi) => self.top.iter().map(|&i| psi[i].norm_sqr()).sum(),
            Cond::Density(rho) => self.top.iter().map(|&i| rho[(i, i)].re).sum(),
        }
    }

    fn sample(&self, state: &Cond, t: f64, s: &mut Samples, positivity: bool) -> Result<()> {
        let pops: Vec<f64> = match state {
            Cond::Pure(psi) => psi.iter().map(|a| a.norm_sqr()).collect(),
            Cond::Density(rho) => {
                if positivity {
                    let q = QuantumState::density(self.space, rho.clone())?;
                    let ev = q.min_eigenvalue()?;
                    if ev < -POSITIVITY_TOL {
                        return Err(Error::Positivity(ev));
                    }
                }
                (0..rho.nrows()).map(|i| rho[(i, i)].re).collect()
            }
        };
        let dot = |d: &[f64]| pops.iter().zip(d).map(|(p, v)| p * v).sum::<f64>();
        s.times.push(t);
        s.n.push(dot(&self.diag_n));
        if let Some(d) = &self.diag_sz {
            s.sigma_z.push(dot(d));
        }
        if let Some(d) = &self.diag_pe {
            s.p_e.push(dot(d));
        }
        if let Some(d) = &self.diag_pd {
            s.p_d.push(dot(d));
        }
        Ok(())
    }
}

struct Pass {
    log_likelihood: f64,
    checkpoint_log_likelihood: Vec<f64>,
    leak_max: f64,
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// `<v|A|v>` for hermitian `A`.
fn sandwich_vec(a: &SparseOperator, v: &[C64]) -> f64 {
    let mut acc = 0.0;
    for r in 0..v.len() {
        if v[r] == ZERO {
            continue;
        }
        let mut row = ZERO;
        for (c, x) in a.row(r) {
            row += x * v[c];
        }
        acc += (v[r].conj() * row).re;
    }
    acc
}

fn trace(m: &Mat<C64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

fn trace_product(a: &SparseOperator, rho: &Mat<C64>) -> f64 {
    a.iter().map(|(r, c, v)| (v * rho[(c, r)]).re).sum()
}

fn scale_mat(m: &mut Mat<C64>, s: f64) {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            m[(r, c)] *= s;
        }
    }
}

/// `out += factor * L rho L^dag`.
fn add_jump_term(l: &SparseOperator, rho: &Mat<C64>, out: &mut Mat<C64>, factor: f64) {
    let entries: Vec<(usize, usize, C64)> = l.iter().collect();
    for &(i, k, a) in &entries {
        for &(j, m, b) in &entries {
            let v = rho[(k, m)];
            if v != ZERO {
                out[(i, j)] += a * v * b.conj() * factor;
            }
        }
    }
}

/// Largest difference in the ensemble-averaged `<n>` between grids `dt` and
/// `dt/2` over `[0, t_final]`, obtained by iterating [`Unraveling::mean_step`]
/// from Fock state `initial_fock`. Used to validate a step size before
/// committing to a long run.
pub fn step_doubling_deviation(spec: &ModelSpec, initial_fock: u32, t_final: f64, dt: f64) -> Result<f64> {
    let coarse = Unraveling::new(spec, dt)?;
    let fine = Unraveling::new(spec, 0.5 * dt)?;
    let n_steps = (t_final / dt).round().max(1.0) as u64;
    let rho0 = match coarse.initial(initial_fock)? {
        Cond::Pure(v) => Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj()),
        Cond::Density(m) => m,
    };
    let occupation = |rho: &Mat<C64>| (0..rho.nrows()).map(|i| rho[(i, i)].re * coarse.diag_n[i]).sum::<f64>();
    let (mut a, mut b) = (rho0.clone(), rho0);
    let mut worst: f64 = 0.0;
    for _ in 0..n_steps {
        a = coarse.mean_step(&a)?;
        b = fine.mean_step(&fine.mean_step(&b)?)?;
        worst = worst.max((occupation(&a) - occupation(&b)).abs());
    }
    Ok(worst)
}

/// Runs a single perfect-counting trajectory from `|0>|down>`.
pub fn run_trajectory_perfect(
    params: crate::models::RabiParams,
    fock_dim: usize,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<TrajectoryOutput> {
    run_single(ModelSpec::rabi(params, super::SchemeConfig::Perfect, fock_dim), t_final, dt, seed)
}

/// Runs a single ancilla-detected trajectory from `|0>|down>|g>`.
pub fn run_trajectory_ancilla(
    params: crate::models::RabiParams,
    anc: crate::models::AncillaParams,
    fock_dim: usize,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<TrajectoryOutput> {
    run_single(ModelSpec::rabi(params, super::SchemeConfig::Ancilla(anc), fock_dim), t_final, dt, seed)
}

/// Runs a single noisy-counting trajectory from `|0>|down>`.
pub fn run_trajectory_noisy(
    params: crate::models::RabiParams,
    noise: crate::models::NoiseParams,
    fock_dim: usize,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<TrajectoryOutput> {
    run_single(ModelSpec::rabi(params, super::SchemeConfig::Noisy(noise), fock_dim), t_final, dt, seed)
}

fn run_single(spec: ModelSpec, t_final: f64, dt: f64, seed: u64) -> Result<TrajectoryOutput> {
    let cfg = TrajectoryConfig::new(spec, t_final, dt)?;
    Unraveling::new(&spec, dt)?.run_seeded(&cfg, seed, 0)
}
