//! Likelihood replay of detection records and Monte Carlo Fisher information.
//!
//! Records are sampled at the true parameter and replayed at `theta +- delta`.
//! The score at each checkpoint is the central difference of `ln P`, and the
//! Fisher information estimate is the ensemble mean of the squared score.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{
    checkpoint_steps, mean_and_sem, pairwise_sum, par_map, ModelSpec, Parameter, TrajectoryConfig, TrajectoryRecord,
    Unraveling, LEAK_TOL,
};
use crate::error::{Error, Result};

/// Default finite-difference step relative to the parameter value.
pub const DEFAULT_RELATIVE_DELTA: f64 = 1e-3;
/// Trajectories used for the delta / (delta/2) consistency check.
pub const DEFAULT_RICHARDSON_TRAJECTORIES: usize = 100;
/// Relative change always tolerated by the Richardson check, for checkpoints
/// where every trajectory has the same score and the standard error vanishes.
pub const RICHARDSON_FLOOR: f64 = 1e-6;

/// `ln P` of a record under the generating model with one parameter shifted.
pub fn replay_log_likelihood(record: &TrajectoryRecord, parameter: Parameter, offset: f64) -> Result<f64> {
    let spec = record.spec.shifted(parameter, offset)?;
    Unraveling::new(&spec, record.dt)?.replay(record, &[record.n_steps]).map(|r| r.log_likelihood)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodCurve {
    pub parameter: Parameter,
    pub offsets: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
}

/// `ln P` of one record at several parameter offsets; `0` is always included.
pub fn likelihood_curve(record: &TrajectoryRecord, parameter: Parameter, offsets: &[f64]) -> Result<LikelihoodCurve> {
    let mut offsets = offsets.to_vec();
    if !offsets.contains(&0.0) {
        offsets.push(0.0);
    }
    offsets.sort_by(f64::total_cmp);
    let log_likelihoods = offsets
        .iter()
        .map(|&o| replay_log_likelihood(record, parameter, o))
        .collect::<Result<_>>()?;
    Ok(LikelihoodCurve { parameter, offsets, log_likelihoods })
}

#[derive(Debug, Clone)]
pub struct FisherConfig {
    pub spec: ModelSpec,
    pub parameter: Parameter,
    pub dt: f64,
    pub t_checkpoints: Vec<f64>,
    pub n_traj: usize,
    /// Finite-difference step; `None` uses `1e-3` times the parameter value.
    pub delta: Option<f64>,
    pub master_seed: u64,
    pub initial_fock: u32,
    pub richardson_trajectories: usize,
    /// 0: all available cores.
    pub workers: usize,
    pub leak_tol: f64,
}

impl FisherConfig {
    pub fn new(spec: ModelSpec, parameter: Parameter, dt: f64, t_checkpoints: Vec<f64>, n_traj: usize) -> Self {
        Self {
            spec,
            parameter,
            dt,
            t_checkpoints,
            n_traj,
            delta: None,
            master_seed: 0,
            initial_fock: 0,
            richardson_trajectories: DEFAULT_RICHARDSON_TRAJECTORIES,
            workers: 0,
            leak_tol: LEAK_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n_traj == 0 {
            return Err(Error::Config("n_traj must be positive".into()));
        }
        if self.t_checkpoints.is_empty() {
            return Err(Error::Config("at least one checkpoint is required".into()));
        }
        let d = self.delta()?;
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Config(format!("delta must be positive, got {d}")));
        }
        self.trajectory_config().map(|_| ())
    }

    pub fn delta(&self) -> Result<f64> {
        match self.delta {
            Some(d) => Ok(d),
            None => {
                let v = self
                    .spec
                    .parameter(self.parameter)
                    .ok_or_else(|| Error::Config("model has no such parameter".into()))?;
                Ok(DEFAULT_RELATIVE_DELTA * v.abs())
            }
        }
    }

    pub fn t_final(&self) -> f64 {
        self.t_checkpoints.iter().copied().fold(0.0, f64::max)
    }

    pub fn trajectory_config(&self) -> Result<TrajectoryConfig> {
        let mut cfg = TrajectoryConfig::new(self.spec, self.t_final(), self.dt)?.initial_fock(self.initial_fock);
        cfg.checkpoints = checkpoint_steps(&self.t_checkpoints, self.dt, cfg.n_steps)?;
        cfg.leak_tol = self.leak_tol;
        Ok(cfg)
    }

    /// Short digest of the model, parameter and grid, embedded in exports.
    pub fn params_hash(&self) -> String {
        let text = format!("{:?}|{:?}|{:?}|{:?}|{:?}", self.spec, self.parameter, self.dt, self.t_checkpoints, self.initial_fock);
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Scores of one trajectory at every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub index: u64,
    pub scores: Vec<f64>,
    /// Scores with the halved step, for the Richardson subset only.
    pub half_scores: Option<Vec<f64>>,
    pub log_likelihood: f64,
    pub events: usize,
}

/// Outcome of one trajectory: scores, or the reason it was quarantined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryOutcome {
    Scored(ScoreSample),
    Failed { index: u64, reason: String },
}

impl TrajectoryOutcome {
    pub fn index(&self) -> u64 {
        match self {
            TrajectoryOutcome::Scored(s) => s.index,
            TrajectoryOutcome::Failed { index, .. } => *index,
        }
    }
}

/// Propagators at the true and shifted parameters, built once per run.
pub struct ScoreEngine {
    base: Unraveling,
    plus: Unraveling,
    minus: Unraveling,
    plus_half: Unraveling,
    minus_half: Unraveling,
    traj: TrajectoryConfig,
    delta: f64,
}

impl ScoreEngine {
    pub fn new(cfg: &FisherConfig) -> Result<Self> {
        cfg.validate()?;
        let delta = cfg.delta()?;
        let at = |d: f64| -> Result<Unraveling> { Unraveling::new(&cfg.spec.shifted(cfg.parameter, d)?, cfg.dt) };
        Ok(Self {
            base: Unraveling::new(&cfg.spec, cfg.dt)?,
            plus: at(delta)?,
            minus: at(-delta)?,
            plus_half: at(0.5 * delta)?,
            minus_half: at(-0.5 * delta)?,
            traj: cfg.trajectory_config()?,
            delta,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn trajectory_config(&self) -> &TrajectoryConfig {
        &self.traj
    }

    /// Samples trajectory `index` and scores it.
    pub fn score_trajectory(&self, master_seed: u64, index: u64, with_half: bool) -> Result<(ScoreSample, TrajectoryRecord)> {
        let out = self.base.run_seeded(&self.traj, master_seed, index)?;
        let sample = self.score_record(&out.record, index, with_half)?;
        Ok((sample, out.record))
    }

    /// Scores a stored record by replaying it at the shifted parameters.
    pub fn score_record(&self, record: &TrajectoryRecord, index: u64, with_half: bool) -> Result<ScoreSample> {
        let cps = &self.traj.checkpoints;
        let centre = self.base.replay(record, cps)?;
        let scores = central_difference(&self.plus, &self.minus, record, cps, self.delta)?;
        let half_scores = if with_half {
            Some(central_difference(&self.plus_half, &self.minus_half, record, cps, 0.5 * self.delta)?)
        } else {
            None
        };
        Ok(ScoreSample { index, scores, half_scores, log_likelihood: centre.log_likelihood, events: record.count() })
    }
}

fn central_difference(
    plus: &Unraveling,
    minus: &Unraveling,
    record: &TrajectoryRecord,
    cps: &[u64],
    delta: f64,
) -> Result<Vec<f64>> {
    let p = plus.replay(record, cps)?;
    let m = minus.replay(record, cps)?;
    Ok(p.checkpoint_log_likelihood
        .iter()
        .zip(&m.checkpoint_log_likelihood)
        .map(|(a, b)| (a - b) / (2.0 * delta))
        .collect())
}

/// Scores trajectories `first..first + count` on `cfg.workers` threads.
pub fn score_trajectories(engine: &ScoreEngine, cfg: &FisherConfig, first: u64, count: u64) -> Result<Vec<TrajectoryOutcome>> {
    let n_half = cfg.richardson_trajectories as u64;
    par_map(first..first + count, cfg.workers, |i| match engine.score_trajectory(cfg.master_seed, i, i < n_half) {
        Ok((s, _)) => TrajectoryOutcome::Scored(s),
        Err(e) => TrajectoryOutcome::Failed { index: i, reason: e.to_string() },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherEstimate {
    pub t_checkpoints: Vec<f64>,
    /// Mean squared score.
    pub fi_values: Vec<f64>,
    /// Standard deviation of the squared scores over `sqrt(n)`.
    pub std_errors: Vec<f64>,
    /// Sample variance of the score (mean subtracted before squaring).
    pub fi_centered: Vec<f64>,
    pub score_mean: Vec<f64>,
    pub score_sem: Vec<f64>,
    pub n_trajectories: usize,
    pub n_failed: usize,
    pub quarantined: Vec<u64>,
    pub delta: f64,
    pub scheme: String,
    pub params_hash: String,
}

impl FisherEstimate {
    /// Aggregates per-trajectory scores; `scores[m][k]` is trajectory `m` at checkpoint `k`.
    pub fn from_scores(t_checkpoints: &[f64], scores: &[Vec<f64>], delta: f64) -> Result<Self> {
        let nk = t_checkpoints.len();
        if scores.iter().any(|s| s.len() != nk) {
            return Err(Error::DimensionMismatch { expected: nk, found: scores.iter().map(Vec::len).find(|&l| l != nk).unwrap_or(0) });
        }
        let mut est = Self {
            t_checkpoints: t_checkpoints.to_vec(),
            fi_values: Vec::with_capacity(nk),
            std_errors: Vec::with_capacity(nk),
            fi_centered: Vec::with_capacity(nk),
            score_mean: Vec::with_capacity(nk),
            score_sem: Vec::with_capacity(nk),
            n_trajectories: scores.len(),
            n_failed: 0,
            quarantined: Vec::new(),
            delta,
            scheme: String::new(),
            params_hash: String::new(),
        };
        for k in 0..nk {
            let s: Vec<f64> = scores.iter().map(|v| v[k]).collect();
            let sq: Vec<f64> = s.iter().map(|x| x * x).collect();
            let (fi, fi_se) = mean_and_sem(&sq);
            let (mean, sem) = mean_and_sem(&s);
            let n = s.len() as f64;
            let centered = if s.len() > 1 {
                pairwise_sum(&s.iter().map(|x| (x - mean).powi(2)).collect::<Vec<_>>()) / (n - 1.0)
            } else {
                f64::NAN
            };
            est.fi_values.push(fi);
            est.std_errors.push(fi_se);
            est.fi_centered.push(centered);
            est.score_mean.push(mean);
            est.score_sem.push(sem);
        }
        Ok(est)
    }

    pub fn failure_fraction(&self) -> f64 {
        let total = self.n_trajectories + self.n_failed;
        if total == 0 {
            0.0
        } else {
            self.n_failed as f64 / total as f64
        }
    }

    /// CSV with columns `t, fi, std_err, n_traj, delta, scheme, params_hash`,
    /// followed by the centered estimate and the score mean and its error.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            t: f64,
            fi: f64,
            std_err: f64,
            n_traj: usize,
            delta: f64,
            scheme: &'a str,
            params_hash: &'a str,
            fi_centered: f64,
            score_mean: f64,
            score_sem: f64,
        }
        let mut wr = csv::Writer::from_writer(w);
        for k in 0..self.t_checkpoints.len() {
            wr.serialize(Row {
                t: self.t_checkpoints[k],
                fi: self.fi_values[k],
                std_err: self.std_errors[k],
                n_traj: self.n_trajectories,
                delta: self.delta,
                scheme: &self.scheme,
                params_hash: &self.params_hash,
                fi_centered: self.fi_centered[k],
                score_mean: self.score_mean[k],
                score_sem: self.score_sem[k],
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the columns written by [`FisherEstimate::write_csv`] back.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t: f64,
            fi: f64,
            std_err: f64,
            n_traj: usize,
            delta: f64,
            scheme: String,
            params_hash: String,
            fi_centered: Option<f64>,
            score_mean: Option<f64>,
            score_sem: Option<f64>,
        }
        let mut rd = csv::Reader::from_reader(r);
        let mut est = Self {
            t_checkpoints: vec![],
            fi_values: vec![],
            std_errors: vec![],
            fi_centered: vec![],
            score_mean: vec![],
            score_sem: vec![],
            n_trajectories: 0,
            n_failed: 0,
            quarantined: vec![],
            delta: 0.0,
            scheme: String::new(),
            params_hash: String::new(),
        };
        for row in rd.deserialize() {
            let row: Row = row?;
            est.t_checkpoints.push(row.t);
            est.fi_values.push(row.fi);
            est.std_errors.push(row.std_err);
            est.fi_centered.push(row.fi_centered.unwrap_or(f64::NAN));
            est.score_mean.push(row.score_mean.unwrap_or(f64::NAN));
            est.score_sem.push(row.score_sem.unwrap_or(f64::NAN));
            est.n_trajectories = row.n_traj;
            est.delta = row.delta;
            est.scheme = row.scheme;
            est.params_hash = row.params_hash;
        }
        if est.t_checkpoints.is_empty() {
            return Err(Error::Dataset("empty Fisher table".into()));
        }
        Ok(est)
    }
}

/// Combines scored trajectories into an estimate and runs the Richardson
/// check on those carrying half-step scores.
pub fn aggregate(cfg: &FisherConfig, delta: f64, outcomes: &[TrajectoryOutcome]) -> Result<FisherEstimate> {
    let mut scored: Vec<&ScoreSample> = Vec::new();
    let mut quarantined = Vec::new();
    for o in outcomes {
        match o {
            TrajectoryOutcome::Scored(s) => scored.push(s),
            TrajectoryOutcome::Failed { index, .. } => quarantined.push(*index),
        }
    }
    if scored.is_empty() {
        return Err(Error::Config("every trajectory failed".into()));
    }
    let scores: Vec<Vec<f64>> = scored.iter().map(|s| s.scores.clone()).collect();
    let mut est = FisherEstimate::from_scores(&cfg.t_checkpoints, &scores, delta)?;
    est.n_failed = quarantined.len();
    est.quarantined = quarantined;
    est.scheme = cfg.spec.scheme.name().to_string();
    est.params_hash = cfg.params_hash();

    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> =
        scored.iter().filter_map(|s| s.half_scores.as_ref().map(|h| (&s.scores, h))).collect();
    if pairs.len() >= 2 {
        richardson_check(&pairs)?;
    }
    Ok(est)
}

/// Halving delta must change the mean squared score by less than its
/// Monte Carlo standard error on the same trajectories.
pub fn richardson_check(pairs: &[(&Vec<f64>, &Vec<f64>)]) -> Result<()> {
    let nk = pairs[0].0.len();
    for k in 0..nk {
        let coarse: Vec<f64> = pairs.iter().map(|(c, _)| c[k] * c[k]).collect();
        let fine: Vec<f64> = pairs.iter().map(|(_, f)| f[k] * f[k]).collect();
        let (fc, se) = mean_and_sem(&coarse);
        let (ff, _) = mean_and_sem(&fine);
        let tolerance = se.max(RICHARDSON_FLOOR * fc.abs());
        if (fc - ff).abs() > tolerance {
            return Err(Error::DeltaTooLarge { coarse: fc, fine: ff, tolerance });
        }
    }
    Ok(())
}

/// Full pipeline: sample, replay and aggregate.
pub fn estimate_fisher(cfg: &FisherConfig) -> Result<FisherEstimate> {
    let engine = ScoreEngine::new(cfg)?;
    let outcomes = score_trajectories(&engine, cfg, 0, cfg.n_traj as u64)?;
    aggregate(cfg, engine.delta(), &outcomes)
}

/// Fisher information from stored records at a (possibly new) step `delta`.
pub fn fisher_from_records(
    records: &[TrajectoryRecord],
    parameter: Parameter,
    delta: f64,
    t_checkpoints: &[f64],
    workers: usize,
) -> Result<FisherEstimate> {
    let first = records.first().ok_or_else(|| Error::Config("no records".into()))?;
    if records.iter().any(|r| r.spec != first.spec || r.dt.to_bits() != first.dt.to_bits() || r.n_steps != first.n_steps) {
        return Err(Error::RecordMismatch("records come from different runs".into()));
    }
    let mut cfg = FisherConfig::new(first.spec, parameter, first.dt, t_checkpoints.to_vec(), records.len());
    cfg.delta = Some(delta);
    cfg.initial_fock = first.initial_fock;
    cfg.workers = workers;
    let engine = ScoreEngine::new(&cfg)?;
    if engine.trajectory_config().n_steps > first.n_steps {
        return Err(Error::RecordMismatch("checkpoints beyond the recorded grid".into()));
    }
    let outcomes = par_map(0..records.len() as u64, workers, |i| {
        let r = &records[i as usize];
        let with_half = (i as usize) < cfg.richardson_trajectories;
        match engine.score_record(r, r.stream, with_half) {
            Ok(s) => TrajectoryOutcome::Scored(s),
            Err(e) => TrajectoryOutcome::Failed { index: r.stream, reason: e.to_string() },
        }
    })?;
    aggregate(&cfg, delta, &outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointFlags {
    pub t: f64,
    /// Mean score further than 3 standard errors from zero.
    pub biased: bool,
    /// Error bar above half the estimate.
    pub undersampled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub checkpoints: Vec<CheckpointFlags>,
}

impl DiagnosticReport {
    pub fn is_clean(&self) -> bool {
        self.checkpoints.iter().all(|c| !c.biased && !c.undersampled)
    }
}

pub fn score_mean_diagnostic(est: &FisherEstimate) -> DiagnosticReport {
    let checkpoints = (0..est.t_checkpoints.len())
        .map(|k| {
            let (m, sem) = (est.score_mean[k], est.score_sem[k]);
            let biased = if sem.is_finite() && sem > 0.0 { m.abs() > 3.0 * sem } else { m != 0.0 && sem == 0.0 };
            let undersampled = !(est.std_errors[k] <= 0.5 * est.fi_values[k].abs()) || est.n_trajectories < 2;
            CheckpointFlags { t: est.t_checkpoints[k], biased, undersampled }
        })
        .collect();
    DiagnosticReport { checkpoints }
}
