//! Experiment configuration files.
//!
//! A config is a TOML document. Rates and frequencies are read either in
//! dimensionless reference-rate units or, with `unit = "2pi_hz"`, as
//! ordinary frequencies in Hz that are multiplied by 2 pi; times are then
//! in seconds.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rabisense::dynamics::{fit_effective_kappa, ModelSpec, Parameter, SchemeConfig, LEAK_TOL};
use rabisense::models::{tune_to_cp, AncillaParams, NoiseParams, RabiParams};
use rabisense::quantum::HilbertSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Unit {
    #[default]
    #[serde(rename = "dimensionless")]
    Dimensionless,
    #[serde(rename = "2pi_hz")]
    TwoPiHz,
}

impl Unit {
    fn rate_factor(self) -> f64 {
        match self {
            Unit::Dimensionless => 1.0,
            Unit::TwoPiHz => TAU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Perfect,
    Ancilla,
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub omega: f64,
    /// Required for the perfect and noisy schemes; fitted from the ancilla otherwise.
    pub kappa: Option<f64>,
    /// System sizes; each is tuned to the critical coupling.
    pub eta: Option<OneOrMany>,
    /// Explicit qubit frequency and coupling, used when `eta` is absent.
    pub omega_q: Option<f64>,
    pub lambda: Option<f64>,
    pub fock_dim: Option<usize>,
    #[serde(default)]
    pub fock_margin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherSection {
    pub n_traj: usize,
    pub dt: f64,
    /// Explicit checkpoint times shared by every system size.
    pub checkpoints: Option<Vec<f64>>,
    /// Otherwise `n_checkpoints` log-spaced times from `t_min` to `t_final`,
    /// or to `t_final_over_eta * eta / kappa` per system size.
    pub t_min: Option<f64>,
    pub t_final: Option<f64>,
    pub t_final_over_eta: Option<f64>,
    #[serde(default = "default_n_checkpoints")]
    pub n_checkpoints: usize,
    #[serde(alias = "delta_omega")]
    pub delta: Option<f64>,
    #[serde(default = "default_parameter")]
    pub parameter: String,
    #[serde(default = "default_richardson")]
    pub richardson_trajectories: usize,
    #[serde(default)]
    pub initial_fock: u32,
    #[serde(default)]
    pub save_records: bool,
    #[serde(default = "default_chunk")]
    pub chunk: usize,
    #[serde(default = "default_leak_tol")]
    pub leak_tol: f64,
    /// Failure fraction above which the run counts as partial.
    #[serde(default = "default_max_failure")]
    pub max_failure_fraction: f64,
}

fn default_n_checkpoints() -> usize {
    12
}
fn default_parameter() -> String {
    "omega".into()
}
fn default_richardson() -> usize {
    rabisense::inference::DEFAULT_RICHARDSON_TRAJECTORIES
}
fn default_chunk() -> usize {
    256
}
fn default_leak_tol() -> f64 {
    LEAK_TOL
}
fn default_max_failure() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySection {
    /// Also solve the full model with the ancilla detector.
    #[serde(default)]
    pub two_ion: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub initial_fock: usize,
    pub t_final: f64,
    pub dt: Option<f64>,
    #[serde(default)]
    pub trajectory: u64,
    #[serde(default = "default_sample_every")]
    pub sample_every: u64,
}

fn default_sample_every() -> u64 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaFitSection {
    #[serde(default = "default_initial_n")]
    pub initial_n: usize,
    #[serde(default)]
    pub omega_w_factors: Vec<f64>,
    #[serde(default)]
    pub omega_s_factors: Vec<f64>,
    #[serde(default)]
    pub gamma_s_factors: Vec<f64>,
}

fn default_initial_n() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub unit: Unit,
    pub scheme: SchemeKind,
    #[serde(default)]
    pub master_seed: u64,
    /// Output directory; not part of the config hash.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads, 0 for all cores; not part of the config hash.
    #[serde(default)]
    pub workers: usize,
    pub model: Option<ModelSection>,
    pub ancilla: Option<AncillaParams>,
    pub noise: Option<NoiseParams>,
    pub fisher: Option<FisherSection>,
    pub steady: Option<SteadySection>,
    pub detector: Option<DetectorSection>,
    pub kappa_fit: Option<KappaFitSection>,
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

/// One system size with its resolved model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizePoint {
    pub eta: f64,
    pub kappa: f64,
    pub spec: ModelSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// First 16 hex digits of the sha256 of the canonical JSON form, with the
    /// output directory and worker count cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        c.workers = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        match self.scheme {
            SchemeKind::Ancilla if self.ancilla.is_none() => return bad("scheme \"ancilla\" needs an [ancilla] table".into()),
            SchemeKind::Noisy if self.noise.is_none() => return bad("scheme \"noisy\" needs a [noise] table".into()),
            _ => {}
        }
        if let Some(a) = &self.ancilla {
            a.validate()?;
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        if let Some(m) = &self.model {
            if !(m.omega > 0.0) {
                return bad(format!("model.omega must be positive, got {}", m.omega));
            }
            if let Some(k) = m.kappa {
                if !(k >= 0.0) {
                    return bad(format!("model.kappa must be non-negative, got {k}"));
                }
            } else if self.scheme != SchemeKind::Ancilla {
                return bad("model.kappa is required unless the ancilla sets the damping".into());
            }
            match (&m.eta, m.omega_q, m.lambda) {
                (Some(e), None, None) => {
                    let etas = e.values();
                    if etas.is_empty() || etas.iter().any(|&x| !(x > 0.0)) {
                        return bad("model.eta values must be positive".into());
                    }
                    if etas.iter().enumerate().any(|(i, x)| etas[..i].contains(x)) {
                        return bad("model.eta values must be distinct".into());
                    }
                }
                (None, Some(q), Some(l)) if q > 0.0 && l >= 0.0 => {}
                _ => return bad("give either model.eta or both model.omega_q and model.lambda".into()),
            }
        }
        if let Some(f) = &self.fisher {
            if f.n_traj == 0 {
                return bad("fisher.n_traj must be positive".into());
            }
            if f.n_traj < 100 {
                return bad(format!("fisher.n_traj must be at least 100, got {}", f.n_traj));
            }
            if !(f.dt > 0.0) {
                return bad(format!("fisher.dt must be positive, got {}", f.dt));
            }
            if f.chunk == 0 {
                return bad("fisher.chunk must be positive".into());
            }
            self.parameter()?;
            let explicit = f.checkpoints.is_some();
            let ranged = f.t_final.is_some() || f.t_final_over_eta.is_some();
            if explicit == ranged || (f.t_final.is_some() && f.t_final_over_eta.is_some()) {
                return bad("fisher needs exactly one of checkpoints, t_final or t_final_over_eta".into());
            }
            if ranged && f.n_checkpoints < 2 {
                return bad("fisher.n_checkpoints must be at least 2".into());
            }
        }
        Ok(())
    }

    pub fn parameter(&self) -> CliResult<Parameter> {
        match self.fisher.as_ref().map(|f| f.parameter.as_str()) {
            None | Some("omega") => Ok(Parameter::Omega),
            Some("kappa") => Ok(Parameter::Kappa),
            Some(other) => Err(CliError::Config(format!("unknown parameter {other:?}; use \"omega\" or \"kappa\""))),
        }
    }

    pub fn model_section(&self) -> CliResult<&ModelSection> {
        self.model.as_ref().ok_or_else(|| CliError::Config("missing [model] table".into()))
    }

    /// Factor from configured rates to internal units.
    pub fn unit_factor(&self) -> f64 {
        self.unit.rate_factor()
    }

    fn rate(&self, v: f64) -> f64 {
        v * self.unit.rate_factor()
    }

    /// Ancilla parameters in internal units.
    pub fn ancilla_params(&self) -> CliResult<AncillaParams> {
        let a = self.ancilla.ok_or_else(|| CliError::Config("missing [ancilla] table".into()))?;
        Ok(AncillaParams {
            omega_s: self.rate(a.omega_s),
            omega_w: self.rate(a.omega_w),
            gamma_s: self.rate(a.gamma_s),
            gamma_w: self.rate(a.gamma_w),
            ..a
        })
    }

    fn noise_params(&self) -> CliResult<NoiseParams> {
        let n = self.noise.ok_or_else(|| CliError::Config("missing [noise] table".into()))?;
        Ok(NoiseParams {
            gamma_dph: self.rate(n.gamma_dph),
            gamma_m: self.rate(n.gamma_m),
            gamma_h: self.rate(n.gamma_h),
            gamma_c: self.rate(n.gamma_c),
        })
    }

    /// Phonon damping: the configured one, or the fitted ancilla rate.
    pub fn kappa(&self) -> CliResult<f64> {
        let m = self.model_section()?;
        match m.kappa {
            Some(k) => Ok(self.rate(k)),
            None => Ok(fit_effective_kappa(&self.ancilla_params()?, 1)?.kappa),
        }
    }

    pub fn scheme_config(&self) -> CliResult<SchemeConfig> {
        Ok(match self.scheme {
            SchemeKind::Perfect => SchemeConfig::Perfect,
            SchemeKind::Ancilla => SchemeConfig::Ancilla(self.ancilla_params()?),
            SchemeKind::Noisy => SchemeConfig::Noisy(self.noise_params()?),
        })
    }

    /// Rabi parameters per system size, in internal units.
    pub fn rabi_points(&self) -> CliResult<Vec<(f64, RabiParams)>> {
        let m = self.model_section()?;
        let omega = self.rate(m.omega);
        let kappa = self.kappa()?;
        match &m.eta {
            Some(e) => e.values().into_iter().map(|eta| Ok((eta, tune_to_cp(omega, eta, kappa)?))).collect(),
            None => {
                let p = RabiParams::new(omega, self.rate(m.omega_q.unwrap()), self.rate(m.lambda.unwrap()), kappa)?;
                Ok(vec![(p.eta(), p)])
            }
        }
    }

    pub fn fock_dim(&self, eta: f64) -> CliResult<usize> {
        let m = self.model_section()?;
        Ok(m.fock_dim.unwrap_or(HilbertSpec::default_fock_dim(eta) + m.fock_margin))
    }

    /// Model per system size with the configured scheme.
    pub fn size_points(&self) -> CliResult<Vec<SizePoint>> {
        let scheme = self.scheme_config()?;
        self.rabi_points()?
            .into_iter()
            .map(|(eta, p)| Ok(SizePoint { eta, kappa: p.kappa, spec: ModelSpec::rabi(p, scheme, self.fock_dim(eta)?) }))
            .collect()
    }

    /// Checkpoint times for one system size, in internal time units.
    pub fn checkpoints(&self, eta: f64, kappa: f64) -> CliResult<Vec<f64>> {
        let f = self.fisher.as_ref().ok_or_else(|| CliError::Config("missing [fisher] table".into()))?;
        if let Some(c) = &f.checkpoints {
            return Ok(c.clone());
        }
        let t_final = match (f.t_final, f.t_final_over_eta) {
            (Some(t), _) => t,
            (None, Some(r)) => {
                if !(kappa > 0.0) {
                    return Err(CliError::Config("t_final_over_eta needs kappa > 0".into()));
                }
                r * eta / kappa
            }
            (None, None) => unreachable!("validated"),
        };
        let t_min = f.t_min.unwrap_or(t_final / 100.0);
        if !(t_min > 0.0 && t_min < t_final) {
            return Err(CliError::Config(format!("need 0 < t_min < t_final, got {t_min} and {t_final}")));
        }
        let n = f.n_checkpoints;
        // Snap to the step grid so that every checkpoint is exactly representable.
        let mut out: Vec<f64> = (0..n)
            .map(|i| t_min * (t_final / t_min).powf(i as f64 / (n - 1) as f64))
            .map(|t| ((t / f.dt).round().max(1.0)) * f.dt)
            .collect();
        out.dedup();
        Ok(out)
    }
}
