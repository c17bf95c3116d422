//! Fisher information runs with chunked checkpointing.
//!
//! Each system size keeps an append-only `outcomes.jsonl`: a header line
//! naming the run, then one line per trajectory in index order. A rerun
//! resumes after the longest valid prefix, so an interrupted run finishes
//! with the same tables as an uninterrupted one.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rabisense::dynamics::{par_map, write_records, TrajectoryRecord};
use rabisense::inference::{aggregate, FisherConfig, FisherEstimate, ScoreEngine, TrajectoryOutcome};
use rabisense::scaling::FISHER_EXPONENTS;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SizePoint};
use crate::error::{io_err, CliError, CliResult, Context};
use crate::manifest::{RunManifest, RunStatus, SizeManifest};
use crate::output::{ensure_dir, size_tag, write_bytes, Provenance};
use crate::plot::{write_svg, Panel, Scale, Series};

#[derive(Debug, Clone, Default)]
pub struct FisherOptions {
    /// Discard stored outcomes instead of resuming.
    pub fresh: bool,
    /// Stop once this many new trajectories have been stored.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FisherReport {
    pub status: RunStatus,
    /// Per system size; empty when the run stopped early.
    pub estimates: Vec<(f64, FisherEstimate)>,
    pub csv_paths: Vec<PathBuf>,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config_hash: String,
    params_hash: String,
    n_traj: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    outcome: TrajectoryOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    record: Option<String>,
}

/// Fisher configuration for one system size.
pub fn fisher_config(cfg: &ExperimentConfig, point: &SizePoint) -> CliResult<FisherConfig> {
    let f = cfg.fisher.as_ref().ok_or_else(|| CliError::Config("missing [fisher] table".into()))?;
    let times = cfg.checkpoints(point.eta, point.kappa)?;
    let mut fc = FisherConfig::new(point.spec, cfg.parameter()?, f.dt, times, f.n_traj);
    fc.delta = f.delta.map(|d| d * cfg.unit_factor());
    fc.master_seed = cfg.master_seed;
    fc.initial_fock = f.initial_fock;
    fc.richardson_trajectories = f.richardson_trajectories.min(f.n_traj);
    fc.workers = cfg.workers;
    fc.leak_tol = f.leak_tol;
    fc.validate().context(|| format!("eta = {}", point.eta))?;
    Ok(fc)
}

/// Reads the valid prefix of an outcome log and rewrites the file to it.
fn load_prefix(path: &Path, header: &Header) -> CliResult<Vec<Entry>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let stored: Option<Header> = lines.next().and_then(|l| l.ok()).and_then(|l| serde_json::from_str(&l).ok());
    match stored {
        Some(h) if h == *header => {}
        Some(_) => {
            return Err(CliError::Config(format!(
                "{} belongs to a different run; rerun with --fresh to discard it",
                path.display()
            )))
        }
        None => return Ok(Vec::new()),
    }
    let mut entries = Vec::new();
    for line in lines {
        let Ok(line) = line else { break };
        let Ok(e) = serde_json::from_str::<Entry>(&line) else { break };
        if e.outcome.index() != entries.len() as u64 || entries.len() >= header.n_traj {
            break;
        }
        entries.push(e);
    }
    rewrite(path, header, &entries)?;
    Ok(entries)
}

fn rewrite(path: &Path, header: &Header, entries: &[Entry]) -> CliResult<()> {
    let mut text = serde_json::to_string(header)?;
    text.push('\n');
    for e in entries {
        text.push_str(&serde_json::to_string(e)?);
        text.push('\n');
    }
    write_bytes(path, text.as_bytes())
}

fn append(path: &Path, entries: &[Entry]) -> CliResult<()> {
    let mut file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
    let mut text = String::new();
    for e in entries {
        text.push_str(&serde_json::to_string(e)?);
        text.push('\n');
    }
    file.write_all(text.as_bytes()).map_err(io_err(path))?;
    file.sync_data().map_err(io_err(path))
}

/// The Fisher table with the system size in front and provenance at the end.
pub fn fisher_csv(eta: f64, est: &FisherEstimate, prov: &Provenance) -> CliResult<Vec<u8>> {
    let mut inner = Vec::new();
    est.write_csv(&mut inner)?;
    let mut rd = csv::Reader::from_reader(inner.as_slice());
    let mut wr = csv::Writer::from_writer(Vec::new());
    let mut header = csv::StringRecord::new();
    header.push_field("eta");
    header.extend(rd.headers()?.iter());
    header.push_field("config_hash");
    header.push_field("version");
    wr.write_record(&header)?;
    let tag = size_tag(eta);
    for row in rd.records() {
        let row = row?;
        let mut out = csv::StringRecord::new();
        out.push_field(&tag);
        out.extend(row.iter());
        out.push_field(&prov.config_hash);
        out.push_field(prov.version);
        wr.write_record(&out)?;
    }
    wr.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(wr.into_inner().expect("flushed"))
}

pub fn fisher_csv_name(eta: f64) -> String {
    format!("fisher_eta_{}.csv", size_tag(eta))
}

pub fn cmd_fisher(cfg: &ExperimentConfig, opts: &FisherOptions) -> CliResult<FisherReport> {
    let started = Instant::now();
    let out = ensure_dir(&cfg.output)?;
    let f = cfg.fisher.clone().ok_or_else(|| CliError::Config("missing [fisher] table".into()))?;
    let prov = Provenance::new(cfg.hash());
    let points = cfg.size_points()?;

    let mut budget = opts.stop_after.unwrap_or(usize::MAX);
    let mut manifest = RunManifest::new(cfg, &prov);
    let mut estimates = Vec::new();
    let mut csv_paths = Vec::new();
    let mut status = RunStatus::Complete;

    for point in &points {
        let size_started = Instant::now();
        let label = || format!("eta = {}", point.eta);
        let fc = fisher_config(cfg, point)?;
        let engine = ScoreEngine::new(&fc).context(label)?;
        let dir = ensure_dir(&out.join(format!("eta_{}", size_tag(point.eta))))?;
        let log = dir.join("outcomes.jsonl");
        let header = Header { config_hash: prov.config_hash.clone(), params_hash: fc.params_hash(), n_traj: fc.n_traj };
        let mut entries = if opts.fresh { Vec::new() } else { load_prefix(&log, &header)? };
        if entries.is_empty() {
            rewrite(&log, &header, &[])?;
        }

        let n_half = fc.richardson_trajectories as u64;
        while entries.len() < fc.n_traj && budget > 0 {
            let first = entries.len() as u64;
            let count = f.chunk.min(fc.n_traj - entries.len()).min(budget) as u64;
            let chunk = par_map(first..first + count, fc.workers, |i| {
                match engine.score_trajectory(fc.master_seed, i, i < n_half) {
                    Ok((s, r)) => Entry { outcome: TrajectoryOutcome::Scored(s), record: f.save_records.then(|| r.to_text()) },
                    Err(e) => Entry { outcome: TrajectoryOutcome::Failed { index: i, reason: e.to_string() }, record: None },
                }
            })
            .context(label)?;
            append(&log, &chunk)?;
            entries.extend(chunk);
            budget -= count as usize;
        }

        let mut sm = SizeManifest::new(point.eta, &fc, entries.len());
        if entries.len() < fc.n_traj {
            status = RunStatus::Interrupted;
            sm.elapsed_s = size_started.elapsed().as_secs_f64();
            manifest.sizes.push(sm);
            break;
        }

        let outcomes: Vec<TrajectoryOutcome> = entries.iter().map(|e| e.outcome.clone()).collect();
        let est = aggregate(&fc, engine.delta(), &outcomes).context(label)?;
        sm.quarantined = est.quarantined.clone();
        sm.failure_fraction = est.failure_fraction();
        sm.elapsed_s = size_started.elapsed().as_secs_f64();
        manifest.sizes.push(sm);

        if f.save_records {
            let records = entries
                .iter()
                .filter_map(|e| e.record.as_deref())
                .map(TrajectoryRecord::from_text)
                .collect::<Result<Vec<_>, _>>()
                .context(label)?;
            let path = dir.join("records.bin");
            let mut buf = Vec::new();
            write_records(&mut buf, &records).context(label)?;
            write_bytes(&path, &buf)?;
        }

        let path = out.join(fisher_csv_name(point.eta));
        write_bytes(&path, &fisher_csv(point.eta, &est, &prov)?)?;
        csv_paths.push(path);
        estimates.push((point.eta, est));
    }

    if status == RunStatus::Complete {
        plot_fisher(&out, &points, &estimates)?;
        let worst = estimates.iter().map(|(_, e)| e).max_by(|a, b| a.failure_fraction().total_cmp(&b.failure_fraction()));
        if let Some(e) = worst {
            if e.failure_fraction() > f.max_failure_fraction {
                status = RunStatus::Partial;
            }
        }
    }
    manifest.status = status;
    manifest.elapsed_s = started.elapsed().as_secs_f64();
    manifest.write(&out.join("manifest.json"))?;

    if status == RunStatus::Partial {
        let (failed, total) = estimates
            .iter()
            .fold((0, 0), |(f, t), (_, e)| (f + e.n_failed, t + e.n_failed + e.n_trajectories));
        return Err(CliError::Partial { failed, total, threshold: f.max_failure_fraction });
    }
    Ok(FisherReport { status, estimates, csv_paths, manifest })
}

fn plot_fisher(out: &Path, points: &[SizePoint], estimates: &[(f64, FisherEstimate)]) -> CliResult<()> {
    let series: Vec<Series> = estimates
        .iter()
        .map(|(eta, e)| {
            Series::line(format!("eta = {eta}"), e.t_checkpoints.iter().copied().zip(e.fi_values.iter().copied()).collect())
        })
        .collect();
    write_svg(
        &out.join("fisher.svg"),
        &[Panel {
            title: "Fisher information".into(),
            x_label: "t".into(),
            y_label: "F".into(),
            x_scale: Scale::Log10,
            y_scale: Scale::Log10,
            series,
        }],
    )?;
    if estimates.len() < 2 {
        return Ok(());
    }
    let (a, _) = FISHER_EXPONENTS;
    let series: Vec<Series> = estimates
        .iter()
        .zip(points)
        .map(|((eta, e), p)| {
            let pts = e
                .t_checkpoints
                .iter()
                .zip(&e.fi_values)
                .map(|(&t, &fi)| (p.kappa * t / eta, fi / t.powf(a)))
                .collect();
            Series::line(format!("eta = {eta}"), pts)
        })
        .collect();
    write_svg(
        &out.join("collapse.svg"),
        &[Panel {
            title: "Rescaled Fisher information".into(),
            x_label: "kappa t / eta".into(),
            y_label: "F / t^2".into(),
            x_scale: Scale::Log10,
            y_scale: Scale::Log10,
            series,
        }],
    )
}
