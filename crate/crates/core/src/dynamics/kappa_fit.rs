use super::liouvillian::{evolve_expectations, EvolveOptions, Integrator};
use super::model::ModelSpec;
use crate::error::{Error, Result};
use crate::models::{effective_kappa_analytic, AncillaParams, DEFAULT_SEPARATION};
use crate::quantum::number_operator;

/// Required coefficient of determination of the log-linear fit.
pub const MIN_R2: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct KappaFit {
    /// Fitted rate in the `2 kappa` channel convention.
    pub kappa: f64,
    pub r2: f64,
    pub times: Vec<f64>,
    pub occupation: Vec<f64>,
    /// Number of samples inside the fit window.
    pub window_points: usize,
}

/// Fits the induced phonon damping of the bare mode plus ancilla.
///
/// Evolves `|g>|initial_n>` exactly and fits `ln <n>` linearly where
/// `<n>` lies in `[0.1, 0.8] initial_n`; `<n>` decays as `exp(-2 kappa t)`.
pub fn fit_effective_kappa(anc: &AncillaParams, initial_n: usize) -> Result<KappaFit> {
    anc.validate()?;
    if initial_n == 0 {
        return Err(Error::Config("initial phonon number must be positive".into()));
    }
    if !anc.is_separated(DEFAULT_SEPARATION) {
        return Err(Error::Config(format!(
            "ancilla rates are not separated: strong/weak ratio {:.2} < {DEFAULT_SEPARATION}",
            anc.separation_ratio()
        )));
    }
    let estimate = effective_kappa_analytic(anc)?;
    if estimate == 0.0 || anc.gamma_w == 0.0 {
        return Err(Error::NonExponential { r2: 0.0 });
    }
    // Excitation number is conserved up to weak decays, so n never exceeds initial_n.
    let spec = ModelSpec::detector(*anc, initial_n + 2);
    let model = spec.build()?;
    let psi = spec.initial_state(initial_n)?;
    let n_op = number_operator(model.space());
    let opts = EvolveOptions { integrator: Integrator::Expm, ..Default::default() };
    let n0 = initial_n as f64;
    let mut t_final = 3.0 * 10f64.ln() / estimate;
    for _ in 0..6 {
        let dt = t_final / 600.0;
        let ev = evolve_expectations(&model, &psi, t_final, dt, &[&n_op], &opts)?;
        let occupation = ev.values[0].clone();
        if occupation.last().copied().unwrap_or(n0) > 0.1 * n0 {
            t_final *= 2.0;
            continue;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = ev
            .times
            .iter()
            .zip(&occupation)
            .filter(|(_, &n)| n >= 0.1 * n0 && n <= 0.8 * n0)
            .map(|(&t, &n)| (t, n.ln()))
            .unzip();
        if xs.len() < 3 {
            return Err(Error::NonExponential { r2: 0.0 });
        }
        let (slope, r2) = linear_fit(&xs, &ys);
        if !(r2 > MIN_R2) {
            return Err(Error::NonExponential { r2 });
        }
        return Ok(KappaFit { kappa: -slope / 2.0, r2, times: ev.times, occupation, window_points: xs.len() });
    }
    Err(Error::NonExponential { r2: 0.0 })
}

/// Least-squares slope and coefficient of determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}
