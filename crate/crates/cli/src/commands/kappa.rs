//! Induced phonon damping of the ancilla detector and its parameter trends.

use rabisense::dynamics::{fit_effective_kappa, linear_fit};
use rabisense::models::{effective_kappa_analytic, AncillaParams};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliResult, Context};
use crate::output::{csv_bytes, ensure_dir, write_bytes, Provenance};
use crate::plot::{write_svg, Panel, Scale, Series};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaRow {
    pub sweep: String,
    pub factor: f64,
    pub omega_w: f64,
    pub omega_s: f64,
    pub gamma_s: f64,
    pub kappa_fit: f64,
    pub kappa_analytic: f64,
    pub r2: f64,
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSlope {
    pub sweep: String,
    pub slope: f64,
    pub r2: f64,
}

#[derive(Debug, Clone)]
pub struct KappaReport {
    /// The base point first, then every sweep point. Rates are in config units.
    pub rows: Vec<KappaRow>,
    /// Log-log slope of the fitted rate against each swept parameter.
    pub slopes: Vec<SweepSlope>,
}

impl KappaReport {
    pub fn base(&self) -> &KappaRow {
        &self.rows[0]
    }
}

pub fn cmd_kappa_fit(cfg: &ExperimentConfig) -> CliResult<KappaReport> {
    let anc = cfg.ancilla_params()?;
    let section = cfg.kappa_fit.clone().unwrap_or(crate::config::KappaFitSection {
        initial_n: 1,
        omega_w_factors: Vec::new(),
        omega_s_factors: Vec::new(),
        gamma_s_factors: Vec::new(),
    });
    let prov = Provenance::new(cfg.hash());
    let unit = cfg.unit_factor();

    let row = |sweep: &str, factor: f64, a: AncillaParams| -> CliResult<KappaRow> {
        let label = || format!("kappa fit ({sweep} x {factor})");
        let fit = fit_effective_kappa(&a, section.initial_n).context(label)?;
        Ok(KappaRow {
            sweep: sweep.into(),
            factor,
            omega_w: a.omega_w / unit,
            omega_s: a.omega_s / unit,
            gamma_s: a.gamma_s / unit,
            kappa_fit: fit.kappa / unit,
            kappa_analytic: effective_kappa_analytic(&a).context(label)? / unit,
            r2: fit.r2,
            config_hash: prov.config_hash.clone(),
            version: prov.version.to_string(),
        })
    };

    let base = row("base", 1.0, anc)?;
    let mut rows = vec![base.clone()];
    let mut slopes = Vec::new();
    type Setter = fn(&mut AncillaParams, f64);
    let sweeps: [(&str, &Vec<f64>, Setter, fn(&KappaRow) -> f64); 3] = [
        ("omega_w", &section.omega_w_factors, |a, f| a.omega_w *= f, |r| r.omega_w),
        ("omega_s", &section.omega_s_factors, |a, f| a.omega_s *= f, |r| r.omega_s),
        ("gamma_s", &section.gamma_s_factors, |a, f| a.gamma_s *= f, |r| r.gamma_s),
    ];
    for (name, factors, set, get) in sweeps {
        if factors.is_empty() {
            continue;
        }
        let mut sweep_rows = Vec::new();
        for &f in factors {
            let mut a = anc;
            set(&mut a, f);
            sweep_rows.push(row(name, f, a)?);
        }
        let mut pts: Vec<(f64, f64)> = sweep_rows.iter().map(|r| (get(r), r.kappa_fit)).collect();
        if !factors.contains(&1.0) {
            pts.push((get(&base), base.kappa_fit));
        }
        if pts.len() >= 2 {
            let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
            let (slope, r2) = linear_fit(&xs, &ys);
            slopes.push(SweepSlope { sweep: name.into(), slope, r2 });
        }
        rows.extend(sweep_rows);
    }

    let out = ensure_dir(&cfg.output)?;
    write_bytes(&out.join("kappa_fit.csv"), &csv_bytes(&rows)?)?;
    write_bytes(&out.join("kappa_fit_slopes.csv"), &csv_bytes(&slopes)?)?;
    let mut panels = Vec::new();
    for s in &slopes {
        let mut fit: Vec<(f64, f64)> = rows.iter().filter(|r| r.sweep == s.sweep || r.sweep == "base").map(|r| (r.factor, r.kappa_fit)).collect();
        let mut analytic: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.sweep == s.sweep || r.sweep == "base").map(|r| (r.factor, r.kappa_analytic)).collect();
        fit.sort_by(|a, b| a.0.total_cmp(&b.0));
        analytic.sort_by(|a, b| a.0.total_cmp(&b.0));
        panels.push(Panel {
            title: format!("kappa vs {}, slope {:.3}", s.sweep, s.slope),
            x_label: format!("{} / base", s.sweep),
            y_label: "kappa".into(),
            x_scale: Scale::Log10,
            y_scale: Scale::Log10,
            series: vec![Series::markers("fit", fit), Series::line("estimate", analytic)],
        });
    }
    if !panels.is_empty() {
        write_svg(&out.join("kappa_fit.svg"), &panels)?;
    }
    Ok(KappaReport { rows, slopes })
}
