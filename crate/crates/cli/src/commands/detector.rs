//! Single conditional trajectory of the bare mode monitored through the ancilla.

use rabisense::dynamics::{ModelSpec, TrajectoryConfig, Unraveling};
use rabisense::models::enhancement_factor;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, Context};
use crate::output::{csv_bytes, ensure_dir, write_bytes, Provenance};
use crate::plot::{write_svg, Panel, Scale, Series};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorRow {
    pub t: f64,
    pub n_cond: f64,
    pub clicks: usize,
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct DetectorReport {
    pub rows: Vec<DetectorRow>,
    pub total_clicks: usize,
    /// Detections per initial phonon; `None` from the vacuum.
    pub empirical_n_ph: Option<f64>,
    /// `epsilon Gamma_s / Gamma_w`.
    pub expected_n_ph: f64,
}

pub fn cmd_detector_demo(cfg: &ExperimentConfig) -> CliResult<DetectorReport> {
    let d = cfg.detector.clone().ok_or_else(|| CliError::Config("missing [detector] table".into()))?;
    let anc = cfg.ancilla_params()?;
    let spec = ModelSpec::detector(anc, d.initial_fock + 2);
    let label = || "detector trajectory".to_string();
    let tc = match d.dt {
        Some(dt) => TrajectoryConfig::new(spec, d.t_final, dt),
        None => TrajectoryConfig::with_default_dt(spec, d.t_final),
    }
    .context(label)?
    .initial_fock(d.initial_fock as u32)
    .sample_every(d.sample_every.max(1));
    let unr = Unraveling::new(&spec, tc.dt).context(label)?;
    let out = unr.run_seeded(&tc, cfg.master_seed, d.trajectory).context(label)?;

    let prov = Provenance::new(cfg.hash());
    let rec = &out.record;
    let rows: Vec<DetectorRow> = out
        .samples
        .times
        .iter()
        .zip(&out.samples.n)
        .map(|(&t, &n)| {
            let step = (t / tc.dt).round() as u64;
            DetectorRow {
                t,
                n_cond: n,
                clicks: if step == 0 { 0 } else { rec.count_until(step - 1) },
                config_hash: prov.config_hash.clone(),
                version: prov.version.to_string(),
            }
        })
        .collect();
    let total_clicks = rec.count();
    let report = DetectorReport {
        total_clicks,
        empirical_n_ph: (d.initial_fock > 0).then(|| total_clicks as f64 / d.initial_fock as f64),
        expected_n_ph: enhancement_factor(&anc)?,
        rows,
    };

    let dir = ensure_dir(&cfg.output)?;
    write_bytes(&dir.join("detector_demo.csv"), &csv_bytes(&report.rows)?)?;
    let panel = |title: &str, y: &str, pts: Vec<(f64, f64)>| Panel {
        title: title.into(),
        x_label: "t".into(),
        y_label: y.into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Linear,
        series: vec![Series::line(y, pts)],
    };
    write_svg(
        &dir.join("detector_demo.svg"),
        &[
            panel("Detected photons", "counts", report.rows.iter().map(|r| (r.t, r.clicks as f64)).collect()),
            panel("Conditional occupation", "<n>_c", report.rows.iter().map(|r| (r.t, r.n_cond)).collect()),
        ],
    )?;
    Ok(report)
}
