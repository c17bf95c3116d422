use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{build_ancilla_hamiltonian, build_rabi_hamiltonian, AncillaParams, NoiseParams, RabiParams};
use crate::quantum::space::{ANCILLA_D, ANCILLA_E, ANCILLA_G};
use crate::quantum::sparse::{ancilla_transition, build_ladder, build_pauli, number_operator, Pauli};
use crate::quantum::{HilbertSpec, QuantumState, SparseOperator};

/// Dissipation channel `rate * D[op]`, where `D[L] rho = L rho L^dag - {L^dag L, rho}/2`.
#[derive(Debug, Clone)]
pub struct Channel {
    pub label: String,
    pub op: SparseOperator,
    pub rate: f64,
    /// Whether jumps of this channel appear in the detection record.
    pub monitored: bool,
}

/// Hamiltonian plus dissipation channels.
///
/// Mode damping is stored as jump operator `c` with rate `2 kappa`, so that the
/// photon-count probability per step is `2 kappa <c^dag c> dt`.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub hamiltonian: SparseOperator,
    pub channels: Vec<Channel>,
}

impl LindbladModel {
    pub fn new(hamiltonian: SparseOperator, channels: Vec<Channel>) -> Result<Self> {
        for ch in &channels {
            if !(ch.rate >= 0.0) || !ch.rate.is_finite() {
                return Err(Error::Config(format!("channel {} has invalid rate {}", ch.label, ch.rate)));
            }
            if ch.op.dim() != hamiltonian.dim() {
                return Err(Error::DimensionMismatch { expected: hamiltonian.dim(), found: ch.op.dim() });
            }
        }
        Ok(Self { hamiltonian, channels })
    }

    pub fn space(&self) -> HilbertSpec {
        self.hamiltonian.space()
    }

    /// Channels with a non-zero rate.
    pub fn active_channels(&self) -> impl Iterator<Item = (usize, &Channel)> {
        self.channels.iter().enumerate().filter(|(_, c)| c.rate > 0.0)
    }

    pub fn monitored_ids(&self) -> Vec<usize> {
        self.active_channels().filter(|(_, c)| c.monitored).map(|(i, _)| i).collect()
    }

    pub fn has_unmonitored(&self) -> bool {
        self.active_channels().any(|(_, c)| !c.monitored)
    }

    pub fn max_rate(&self) -> f64 {
        self.channels.iter().map(|c| c.rate).fold(0.0, f64::max)
    }

    /// Effective non-Hermitian generator `-i H - (1/2) sum rate L^dag L`.
    pub fn effective_generator(&self) -> Result<SparseOperator> {
        let mut k = self.hamiltonian.scale(num_complex::Complex64::new(0.0, -1.0));
        for (_, ch) in self.active_channels() {
            let ldl = ch.op.adjoint().mul(&ch.op)?;
            k = k.add(&ldl.scale_real(-0.5 * ch.rate))?;
        }
        Ok(k)
    }

    /// Pure damping of the mode alone: `H = 0`, channel `c` at rate `2 kappa`.
    pub fn pure_decay(kappa: f64, fock_dim: usize) -> Result<Self> {
        let space = HilbertSpec::new(fock_dim, false, false)?;
        let (c, _) = build_ladder(space);
        Self::new(SparseOperator::zeros(space), vec![mode_damping(c, kappa)])
    }
}

fn mode_damping(c: SparseOperator, kappa: f64) -> Channel {
    Channel { label: "photon".into(), op: c, rate: 2.0 * kappa, monitored: true }
}

/// Detection scheme together with its scheme-specific parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SchemeConfig {
    /// Every emitted photon is counted.
    Perfect,
    /// Dissipation and detection through the ancilla with efficiency `epsilon`.
    Ancilla(AncillaParams),
    /// Perfect counting plus unmonitored dephasing, heating and cooling.
    Noisy(NoiseParams),
}

impl SchemeConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeConfig::Perfect => "perfect",
            SchemeConfig::Ancilla(_) => "ancilla",
            SchemeConfig::Noisy(_) => "noisy",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            SchemeConfig::Perfect => 0,
            SchemeConfig::Ancilla(_) => 1,
            SchemeConfig::Noisy(_) => 2,
        }
    }
}

/// Scalar parameter that replays may shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Omega,
    Kappa,
}

/// Everything needed to rebuild a model: parameters, scheme and truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Rabi parameters; `None` only for the bare mode plus ancilla.
    pub rabi: Option<RabiParams>,
    pub scheme: SchemeConfig,
    pub fock_dim: usize,
    /// Without the qubit the mode Hamiltonian reduces to `omega c^dag c`.
    pub system_qubit: bool,
}

impl ModelSpec {
    pub fn rabi(params: RabiParams, scheme: SchemeConfig, fock_dim: usize) -> Self {
        Self { rabi: Some(params), scheme, fock_dim, system_qubit: true }
    }

    /// Mode alone damped at `2 kappa`, no Hamiltonian dynamics relevant to counting.
    pub fn pure_decay(kappa: f64, fock_dim: usize) -> Self {
        let rabi = RabiParams { omega: 1.0, omega_q: 1.0, lambda_c: 0.0, kappa };
        Self { rabi: Some(rabi), scheme: SchemeConfig::Perfect, fock_dim, system_qubit: false }
    }

    /// Mode coupled only to the ancilla detector.
    pub fn detector(anc: AncillaParams, fock_dim: usize) -> Self {
        Self { rabi: None, scheme: SchemeConfig::Ancilla(anc), fock_dim, system_qubit: false }
    }

    pub fn space(&self) -> Result<HilbertSpec> {
        HilbertSpec::new(self.fock_dim, self.system_qubit, matches!(self.scheme, SchemeConfig::Ancilla(_)))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.rabi {
            if self.system_qubit {
                p.validate()?;
            } else if !(p.kappa >= 0.0) {
                return Err(Error::Config(format!("kappa must be non-negative, got {}", p.kappa)));
            }
        }
        match &self.scheme {
            SchemeConfig::Perfect | SchemeConfig::Noisy(_) if self.rabi.is_none() => {
                return Err(Error::Config(format!("the {} scheme needs Rabi parameters", self.scheme.name())))
            }
            SchemeConfig::Ancilla(a) => a.validate()?,
            SchemeConfig::Noisy(n) => {
                n.validate()?;
                if n.gamma_dph > 0.0 && !self.system_qubit {
                    return Err(Error::Config("spin dephasing needs the system qubit".into()));
                }
            }
            SchemeConfig::Perfect => {}
        }
        if self.system_qubit && self.rabi.is_none() {
            return Err(Error::Config("a system qubit needs Rabi parameters".into()));
        }
        Ok(())
    }

    /// Copy with one scalar parameter moved by `delta`.
    pub fn shifted(&self, parameter: Parameter, delta: f64) -> Result<Self> {
        let mut out = *self;
        let p = out
            .rabi
            .as_mut()
            .ok_or_else(|| Error::Config("no Rabi parameters to shift".into()))?;
        match parameter {
            Parameter::Omega => p.omega += delta,
            Parameter::Kappa => {
                if matches!(self.scheme, SchemeConfig::Ancilla(_)) {
                    return Err(Error::Config("kappa is not a free parameter of the ancilla scheme".into()));
                }
                p.kappa += delta;
            }
        }
        Ok(out)
    }

    pub fn parameter(&self, parameter: Parameter) -> Option<f64> {
        self.rabi.map(|p| match parameter {
            Parameter::Omega => p.omega,
            Parameter::Kappa => p.kappa,
        })
    }

    pub fn build(&self) -> Result<LindbladModel> {
        self.validate()?;
        let space = self.space()?;
        let (c, cd) = build_ladder(space);
        let mut h = SparseOperator::zeros(space);
        if let Some(p) = &self.rabi {
            h = if self.system_qubit {
                build_rabi_hamiltonian(p, space)?
            } else {
                number_operator(space).scale_real(p.omega)
            };
        }
        let mut channels = Vec::new();
        match &self.scheme {
            SchemeConfig::Perfect => channels.push(mode_damping(c, self.rabi.map_or(0.0, |p| p.kappa))),
            SchemeConfig::Noisy(n) => {
                channels.push(mode_damping(c.clone(), self.rabi.map_or(0.0, |p| p.kappa)));
                if self.system_qubit {
                    channels.push(unmonitored("dephasing", build_pauli(space, Pauli::Z)?, n.gamma_dph));
                }
                channels.push(unmonitored("motional_dephasing", number_operator(space), n.gamma_m));
                channels.push(unmonitored("heating", cd, n.gamma_h));
                channels.push(unmonitored("cooling", c, n.gamma_c));
            }
            SchemeConfig::Ancilla(a) => {
                h = h.add(&build_ancilla_hamiltonian(a, space)?)?;
                channels.extend(ancilla_channels(a, space)?);
            }
        }
        LindbladModel::new(h.mark_hermitian()?, channels)
    }

    /// Fock-state initial condition with the qubit down and the ancilla in `g`.
    pub fn initial_state(&self, fock_level: usize) -> Result<QuantumState> {
        QuantumState::fock(self.space()?, fock_level)
    }
}

fn unmonitored(label: &str, op: SparseOperator, rate: f64) -> Channel {
    Channel { label: label.into(), op, rate, monitored: false }
}

/// Weak decay `e -> g` (unmonitored) and strong decay `d -> e` split into the
/// detected fraction `epsilon` and the missed fraction `1 - epsilon`.
pub fn ancilla_channels(a: &AncillaParams, space: HilbertSpec) -> Result<Vec<Channel>> {
    let weak = ancilla_transition(space, ANCILLA_G, ANCILLA_E)?;
    let strong = ancilla_transition(space, ANCILLA_E, ANCILLA_D)?;
    Ok(vec![
        Channel { label: "photon".into(), op: strong.clone(), rate: a.epsilon * a.gamma_s, monitored: true },
        unmonitored("strong_missed", strong, (1.0 - a.epsilon) * a.gamma_s),
        unmonitored("weak", weak, a.gamma_w),
    ])
}

/// Default step `1e-2 / (largest channel rate)`.
pub fn default_dt(model: &LindbladModel) -> f64 {
    let r = model.max_rate();
    if r > 0.0 {
        1e-2 / r
    } else {
        1e-2
    }
}
