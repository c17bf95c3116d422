use super::params::{AncillaParams, IonDriveParams, RabiParams, RamanParams};
use crate::error::{Error, Result};

/// Critical coupling `sqrt(1 + (kappa/omega)^2)`.
pub fn critical_coupling(params: &RabiParams) -> Result<f64> {
    if params.omega == 0.0 {
        return Err(Error::DivisionByZero("omega"));
    }
    let r = params.kappa / params.omega;
    Ok((1.0 + r * r).sqrt())
}

/// Parameters with `Omega = eta omega` and `g = g_c`.
pub fn tune_to_cp(omega: f64, eta: f64, kappa: f64) -> Result<RabiParams> {
    if !(omega > 0.0) || !(eta > 0.0) {
        return Err(Error::Config(format!("omega and eta must be positive, got {omega} and {eta}")));
    }
    let omega_q = eta * omega;
    let r = kappa / omega;
    let gc = (1.0 + r * r).sqrt();
    RabiParams::new(omega, omega_q, gc * (omega * omega_q).sqrt() / 2.0, kappa)
}

/// Maps ion drive offsets onto Rabi parameters. `kappa` is left at zero and a
/// non-positive mode frequency is returned as is (see [`RabiParams::is_degenerate`]).
pub fn rabi_from_ion(ion: &IonDriveParams) -> RabiParams {
    RabiParams {
        omega: (ion.delta_b - ion.delta_r) / 2.0,
        omega_q: (ion.delta_b + ion.delta_r) / 2.0,
        lambda_c: ion.eta_ld * ion.omega_0 / 2.0,
        kappa: 0.0,
    }
}

/// Order-of-magnitude estimate `Gamma_s (eta_ld2 Omega_w)^2 / Omega_s^2` of the
/// induced phonon damping. The simulated fit in `dynamics` is authoritative.
pub fn effective_kappa_analytic(anc: &AncillaParams) -> Result<f64> {
    if anc.omega_s == 0.0 {
        return Err(Error::DivisionByZero("omega_s"));
    }
    let w = anc.sideband_coupling();
    Ok(anc.gamma_s * w * w / (anc.omega_s * anc.omega_s))
}

/// Photons emitted per annihilated phonon, `Gamma_s / Gamma_w`.
pub fn emitted_per_phonon(anc: &AncillaParams) -> Result<f64> {
    if anc.gamma_w == 0.0 {
        return Err(Error::DivisionByZero("gamma_w"));
    }
    Ok(anc.gamma_s / anc.gamma_w)
}

/// Detected photons per annihilated phonon, `epsilon Gamma_s / Gamma_w`.
pub fn enhancement_factor(anc: &AncillaParams) -> Result<f64> {
    Ok(anc.epsilon * emitted_per_phonon(anc)?)
}

/// Effective `e -> g` rate induced by a detuned repump.
pub fn weak_rate_raman(raman: &RamanParams) -> Result<f64> {
    if !(raman.gamma_s > 0.0) {
        return Err(Error::Config(format!("gamma_s must be positive, got {}", raman.gamma_s)));
    }
    let s = 2.0 * raman.omega_tilde_s / raman.gamma_s;
    let d = 2.0 * raman.delta / raman.gamma_s;
    Ok(raman.gamma_s / 2.0 * s * s / (1.0 + s * s + d * d))
}

/// Cooling-cycle timescales `(T1, T2, T3)`: dark-to-bright transfer, its
/// undesired reversal, and the weak decay.
pub fn cooling_timescales(anc: &AncillaParams) -> Result<(f64, f64, f64)> {
    if anc.omega_w == 0.0 || anc.gamma_s == 0.0 || anc.gamma_w == 0.0 {
        return Err(Error::DivisionByZero("omega_w, gamma_s and gamma_w must be non-zero"));
    }
    let t1 = anc.omega_s.powi(2) / (anc.omega_w.powi(2) * anc.gamma_s);
    let t2 = (anc.gamma_s.powi(2) + anc.omega_s.powi(2)) * t1 / anc.gamma_s.powi(2);
    Ok((t1, t2, 1.0 / anc.gamma_w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn critical_coupling_values() {
        let p = RabiParams::new(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(critical_coupling(&p).unwrap(), 1.0);
        let p = RabiParams::new(10.0, 1.0, 0.0, 1.0).unwrap();
        assert!(close(critical_coupling(&p).unwrap(), 1.004_987_562_112_089, 1e-14));
        let p = RabiParams::new(2.0, 1.0, 0.0, 2.0).unwrap();
        assert!(close(critical_coupling(&p).unwrap(), 2f64.sqrt(), 1e-15));
        let degenerate = RabiParams { omega: 0.0, omega_q: 1.0, lambda_c: 0.0, kappa: 1.0 };
        assert!(matches!(critical_coupling(&degenerate), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn tuning_hits_the_critical_point() {
        let p = tune_to_cp(1.0, 50.0, 0.1).unwrap();
        assert_eq!(p.omega_q, 50.0);
        assert!((p.g() - critical_coupling(&p).unwrap()).abs() < 1e-12);
        let p = tune_to_cp(3.0, 1.0, 0.0).unwrap();
        assert!((p.lambda_c - 1.5).abs() < 1e-15);
    }

    #[test]
    fn ion_mapping() {
        let ion = IonDriveParams { delta_b: 3.0, delta_r: 1.0, omega_0: 4.0, eta_ld: 0.5 };
        let p = rabi_from_ion(&ion);
        assert_eq!((p.omega, p.omega_q, p.lambda_c, p.kappa), (1.0, 2.0, 1.0, 0.0));
        let sym = IonDriveParams { delta_b: 2.0, delta_r: 2.0, omega_0: 1.0, eta_ld: 0.1 };
        assert!(rabi_from_ion(&sym).is_degenerate());
    }

    #[test]
    fn ion_mapping_experimental_coupling() {
        // (eta_ld Omega_0)_max = 2 pi x 20 kHz gives lambda_max = 2 pi x 10 kHz.
        let two_pi = std::f64::consts::TAU;
        let ion = IonDriveParams { delta_b: 1.0, delta_r: 0.0, omega_0: two_pi * 20e3 / 0.07, eta_ld: 0.07 };
        assert!(close(rabi_from_ion(&ion).lambda_c, two_pi * 10e3, 1e-12));
    }

    fn reference_ancilla(epsilon: f64, ratio: f64) -> AncillaParams {
        let gw = 40.0;
        let gs = ratio * gw;
        AncillaParams::new(2.0 * gs, 14.3 * gw, gs, gw, 0.07, epsilon).unwrap()
    }

    #[test]
    fn analytic_kappa_matches_simulated_order_of_magnitude() {
        let a = reference_ancilla(0.01, 80.0);
        let kappa = effective_kappa_analytic(&a).unwrap();
        let quoted = 1.5e-3 * a.gamma_w;
        assert!(kappa / quoted < 3.0 && quoted / kappa < 3.0, "kappa = {kappa}");
    }

    #[test]
    fn analytic_kappa_scaling() {
        let a = reference_ancilla(0.01, 80.0);
        let k = effective_kappa_analytic(&a).unwrap();
        let doubled = AncillaParams { omega_s: 2.0 * a.omega_s, ..a };
        assert!(close(effective_kappa_analytic(&doubled).unwrap(), k / 4.0, 1e-14));
        let off = AncillaParams { omega_w: 0.0, ..a };
        assert_eq!(effective_kappa_analytic(&off).unwrap(), 0.0);
        let zero = AncillaParams { omega_s: 0.0, ..a };
        assert!(effective_kappa_analytic(&zero).is_err());
    }

    #[test]
    fn enhancement_factor_values() {
        assert!(close(enhancement_factor(&reference_ancilla(0.1, 80.0)).unwrap(), 8.0, 1e-12));
        assert!(close(enhancement_factor(&reference_ancilla(0.01, 10.0)).unwrap(), 0.1, 1e-12));
        assert!(close(enhancement_factor(&reference_ancilla(0.01, 80.0)).unwrap(), 0.8, 1e-12));
        assert_eq!(enhancement_factor(&reference_ancilla(0.0, 80.0)).unwrap(), 0.0);
        let a = AncillaParams { gamma_w: 0.0, ..reference_ancilla(0.1, 80.0) };
        assert!(matches!(enhancement_factor(&a), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn raman_rate() {
        let r = |o, d| weak_rate_raman(&RamanParams { omega_tilde_s: o, delta: d, gamma_s: 2.0 }).unwrap();
        assert!(close(r(1.0, 0.0), 0.5, 1e-15));
        assert_eq!(r(0.0, 3.0), 0.0);
        assert!(close(r(1e6, 0.0), 1.0, 1e-10));
        assert!(weak_rate_raman(&RamanParams { omega_tilde_s: 1.0, delta: 0.0, gamma_s: 0.0 }).is_err());
    }

    #[test]
    fn cooling_cycle_ordering() {
        let a = reference_ancilla(0.01, 80.0);
        let (t1, t2, t3) = cooling_timescales(&a).unwrap();
        assert!(t3 < t2 && t2 > t1);
        assert!(close(t2 / t1, 5.0, 1e-12));
    }
}
