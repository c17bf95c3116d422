//! Steady-state occupation at the critical point versus system size.

use rabisense::dynamics::{linear_fit, steady_state, ModelSpec, SchemeConfig};
use rabisense::quantum::{expectation_real, number_operator};
use serde::Serialize;

use crate::config::{ExperimentConfig, SchemeKind};
use crate::error::{CliError, CliResult, Context};
use crate::output::{csv_bytes, ensure_dir, write_bytes, Provenance};
use crate::plot::{write_svg, Panel, Scale, Series};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyRow {
    pub eta: f64,
    pub n_ideal: f64,
    pub n_two_ion: Option<f64>,
    pub rel_diff: Option<f64>,
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct SteadyReport {
    pub rows: Vec<SteadyRow>,
    /// Log-log slope of the ideal occupation against eta and its R^2.
    pub slope: Option<(f64, f64)>,
}

/// Steady-state `<n>` of the model in `spec`.
pub fn steady_occupation(spec: &ModelSpec) -> rabisense::Result<f64> {
    let model = spec.build()?;
    let rho = steady_state(&model)?;
    expectation_real(&rho, &number_operator(model.space()))
}

pub fn cmd_steady_scan(cfg: &ExperimentConfig) -> CliResult<SteadyReport> {
    let kappa = cfg.kappa()?;
    if !(kappa > 0.0) {
        return Err(CliError::Config("steady-scan needs kappa > 0: the closed model has no steady state at the critical point".into()));
    }
    let two_ion = cfg.steady.as_ref().is_some_and(|s| s.two_ion);
    let anc = if two_ion || cfg.scheme == SchemeKind::Ancilla { Some(cfg.ancilla_params()?) } else { None };
    let prov = Provenance::new(cfg.hash());

    let mut rows = Vec::new();
    for (eta, p) in cfg.rabi_points()? {
        let fock = cfg.fock_dim(eta)?;
        let label = || format!("steady state at eta = {eta}");
        let n_ideal = steady_occupation(&ModelSpec::rabi(p, SchemeConfig::Perfect, fock)).context(label)?;
        let n_two_ion = match (two_ion, anc) {
            (true, Some(a)) => Some(steady_occupation(&ModelSpec::rabi(p, SchemeConfig::Ancilla(a), fock)).context(label)?),
            _ => None,
        };
        rows.push(SteadyRow {
            eta,
            n_ideal,
            n_two_ion,
            rel_diff: n_two_ion.map(|n| (n - n_ideal).abs() / n_ideal),
            config_hash: prov.config_hash.clone(),
            version: prov.version.to_string(),
        });
    }

    let slope = (rows.len() >= 2).then(|| {
        let xs: Vec<f64> = rows.iter().map(|r| r.eta.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.n_ideal.ln()).collect();
        linear_fit(&xs, &ys)
    });

    let out = ensure_dir(&cfg.output)?;
    write_bytes(&out.join("steady_scan.csv"), &csv_bytes(&rows)?)?;
    let mut series = vec![Series::line("ideal", rows.iter().map(|r| (r.eta, r.n_ideal)).collect())];
    if two_ion {
        series.push(Series::markers("two-ion", rows.iter().filter_map(|r| Some((r.eta, r.n_two_ion?))).collect()));
    }
    let title = match slope {
        Some((s, _)) => format!("Steady-state occupation, slope {s:.3}"),
        None => "Steady-state occupation".into(),
    };
    write_svg(
        &out.join("steady_scan.svg"),
        &[Panel { title, x_label: "eta".into(), y_label: "<n>".into(), x_scale: Scale::Log10, y_scale: Scale::Log10, series }],
    )?;
    Ok(SteadyReport { rows, slope })
}
