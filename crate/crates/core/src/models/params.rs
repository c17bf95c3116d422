use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ratio for the `Omega_s, Gamma_s >> Omega_w, Gamma_w` regime check.
pub const DEFAULT_SEPARATION: f64 = 10.0;

fn check_rate(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Config(format!("{name} must be a finite non-negative rate, got {value}")));
    }
    Ok(())
}

/// Rabi sensor parameters, all rates in the same unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    /// Mode frequency.
    pub omega: f64,
    /// Qubit splitting.
    pub omega_q: f64,
    /// Qubit-mode coupling.
    pub lambda_c: f64,
    /// Phonon dissipation rate (jump operator `sqrt(2 kappa) c`).
    pub kappa: f64,
}

impl RabiParams {
    pub fn new(omega: f64, omega_q: f64, lambda_c: f64, kappa: f64) -> Result<Self> {
        let p = Self { omega, omega_q, lambda_c, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::Config(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.omega_q > 0.0) || !self.omega_q.is_finite() {
            return Err(Error::Config(format!("qubit splitting must be positive, got {}", self.omega_q)));
        }
        if !self.lambda_c.is_finite() {
            return Err(Error::Config("coupling must be finite".into()));
        }
        check_rate("kappa", self.kappa)
    }

    /// Effective system size `Omega / omega`.
    pub fn eta(&self) -> f64 {
        self.omega_q / self.omega
    }

    /// Dimensionless coupling `2 lambda / sqrt(omega Omega)`.
    pub fn g(&self) -> f64 {
        2.0 * self.lambda_c.abs() / (self.omega * self.omega_q).sqrt()
    }

    /// True when the mapping from ion offsets produced a non-positive mode frequency.
    pub fn is_degenerate(&self) -> bool {
        !(self.omega > 0.0)
    }

    pub fn with_omega(self, omega: f64) -> Self {
        Self { omega, ..self }
    }
}

/// Ancilla detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaParams {
    /// Strong carrier Rabi frequency on `e <-> d`.
    pub omega_s: f64,
    /// Weak red-sideband Rabi frequency on `g <-> e`.
    pub omega_w: f64,
    /// Decay rate of `d -> e`.
    pub gamma_s: f64,
    /// Decay rate of `e -> g`.
    pub gamma_w: f64,
    /// Lamb-Dicke parameter of the ancilla.
    pub eta_ld2: f64,
    /// Photon detector efficiency.
    pub epsilon: f64,
}

impl AncillaParams {
    pub fn new(omega_s: f64, omega_w: f64, gamma_s: f64, gamma_w: f64, eta_ld2: f64, epsilon: f64) -> Result<Self> {
        let p = Self { omega_s, omega_w, gamma_s, gamma_w, eta_ld2, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("omega_s", self.omega_s)?;
        check_rate("omega_w", self.omega_w)?;
        check_rate("gamma_s", self.gamma_s)?;
        check_rate("gamma_w", self.gamma_w)?;
        check_rate("eta_ld2", self.eta_ld2)?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Smallest ratio between a strong-transition rate and a weak-transition
    /// rate. The weak drive enters through its sideband coupling `eta_ld2 Omega_w`.
    pub fn separation_ratio(&self) -> f64 {
        let strong = self.omega_s.min(self.gamma_s);
        let weak = self.sideband_coupling().max(self.gamma_w);
        if weak == 0.0 {
            f64::INFINITY
        } else {
            strong / weak
        }
    }

    /// Whether the strong transition dominates the weak one by at least `threshold`.
    pub fn is_separated(&self, threshold: f64) -> bool {
        self.separation_ratio() >= threshold
    }

    /// Sideband coupling `eta_ld2 * Omega_w`.
    pub fn sideband_coupling(&self) -> f64 {
        self.eta_ld2 * self.omega_w
    }
}

/// Two-tone drive of the system ion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonDriveParams {
    /// Offset from the blue sideband.
    pub delta_b: f64,
    /// Offset from the red sideband.
    pub delta_r: f64,
    /// Drive Rabi frequency.
    pub omega_0: f64,
    /// Lamb-Dicke parameter of the system ion.
    pub eta_ld: f64,
}

impl IonDriveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_ld > 0.0 && self.eta_ld < 1.0) {
            return Err(Error::Config(format!("eta_ld must lie in (0, 1), got {}", self.eta_ld)));
        }
        if !self.delta_b.is_finite() || !self.delta_r.is_finite() || !self.omega_0.is_finite() {
            return Err(Error::Config("ion drive parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Rates of the additional unmonitored noise channels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Spin dephasing (`sqrt(gamma_dph) sigma_z`).
    pub gamma_dph: f64,
    /// Motional dephasing (`sqrt(gamma_m) c^dag c`).
    pub gamma_m: f64,
    /// Heating (`sqrt(gamma_h) c^dag`).
    pub gamma_h: f64,
    /// Extra cooling (`sqrt(gamma_c) c`).
    pub gamma_c: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        check_rate("gamma_dph", self.gamma_dph)?;
        check_rate("gamma_m", self.gamma_m)?;
        check_rate("gamma_h", self.gamma_h)?;
        check_rate("gamma_c", self.gamma_c)
    }

    pub fn is_zero(&self) -> bool {
        self.gamma_dph == 0.0 && self.gamma_m == 0.0 && self.gamma_h == 0.0 && self.gamma_c == 0.0
    }
}

/// Repump laser producing the effective weak decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanParams {
    pub omega_tilde_s: f64,
    pub delta: f64,
    pub gamma_s: f64,
}
