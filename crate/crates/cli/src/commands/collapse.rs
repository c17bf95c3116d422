//! Finite-size collapse of Fisher tables.

use std::path::{Path, PathBuf};

use rabisense::inference::FisherEstimate;
use rabisense::scaling::{collapse_measure, optimize_collapse, quality_factor, CollapseDataset, CollapseWarning, FISHER_EXPONENTS};
use serde::Serialize;

use crate::error::{CliError, CliResult, Context};
use crate::output::{csv_bytes, ensure_dir, read_bytes, write_bytes, Provenance};
use crate::plot::{write_svg, Panel, Scale, Series};

#[derive(Debug, Clone)]
pub struct CollapseOptions {
    pub inputs: Vec<PathBuf>,
    /// System sizes in input order; read from the `eta` column otherwise.
    pub sizes: Option<Vec<f64>>,
    /// Noiseless reference tables for the quality factor.
    pub ideal: Vec<PathBuf>,
    /// Multiplies `t` to form `h`, usually kappa.
    pub time_scale: f64,
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    /// Exponents at which the measure and the quality factor are reported.
    pub fixed: (f64, f64),
    /// Skip the exponent search.
    pub no_optimize: bool,
    pub output: PathBuf,
}

impl CollapseOptions {
    pub fn new(inputs: Vec<PathBuf>, output: PathBuf) -> Self {
        Self {
            inputs,
            sizes: None,
            ideal: Vec::new(),
            time_scale: 1.0,
            a_range: (1.0, 3.0),
            b_range: (0.0, 2.0),
            fixed: FISHER_EXPONENTS,
            no_optimize: false,
            output,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseRow {
    pub a_opt: Option<f64>,
    pub b_opt: Option<f64>,
    pub measure_opt: Option<f64>,
    pub n_overlap_opt: Option<usize>,
    pub warnings: String,
    pub a_fixed: f64,
    pub b_fixed: f64,
    pub measure_fixed: f64,
    pub measure_ideal_fixed: Option<f64>,
    pub quality_factor: Option<f64>,
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PointRow {
    eta: f64,
    x: f64,
    y: f64,
    a: f64,
    b: f64,
}

fn read_table(path: &Path) -> CliResult<(Option<f64>, FisherEstimate, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let est = FisherEstimate::read_csv(bytes.as_slice()).context(|| path.display().to_string())?;
    let mut rd = csv::Reader::from_reader(bytes.as_slice());
    let col = rd.headers()?.iter().position(|h| h == "eta");
    let mut eta = None;
    if let Some(c) = col {
        for row in rd.records() {
            let v: f64 = row?[c]
                .parse()
                .map_err(|_| CliError::Config(format!("{}: unreadable eta column", path.display())))?;
            match eta {
                None => eta = Some(v),
                Some(e) if e != v => {
                    return Err(CliError::Config(format!("{}: several system sizes in one table", path.display())))
                }
                _ => {}
            }
        }
    }
    Ok((eta, est, bytes))
}

fn load(paths: &[PathBuf], sizes: Option<&[f64]>, time_scale: f64, hashed: &mut Vec<Vec<u8>>) -> CliResult<CollapseDataset> {
    if paths.len() < 2 {
        return Err(CliError::Config(format!("collapse needs at least two Fisher tables, got {}", paths.len())));
    }
    if let Some(s) = sizes {
        if s.len() != paths.len() {
            return Err(CliError::Config(format!("{} sizes for {} tables", s.len(), paths.len())));
        }
    }
    let mut tables = Vec::new();
    for (k, p) in paths.iter().enumerate() {
        let (eta, est, bytes) = read_table(p)?;
        let size = match (sizes, eta) {
            (Some(s), _) => s[k],
            (None, Some(e)) => e,
            (None, None) => return Err(CliError::Config(format!("{} has no eta column; pass --sizes", p.display()))),
        };
        hashed.push(bytes);
        tables.push((size, est));
    }
    let refs: Vec<(f64, &FisherEstimate)> = tables.iter().map(|(s, e)| (*s, e)).collect();
    CollapseDataset::from_fisher(&refs, time_scale).context(|| "collapse dataset".into())
}

fn warning_text(w: &[CollapseWarning]) -> String {
    w.iter().map(|w| format!("{w:?}")).collect::<Vec<_>>().join(";")
}

pub fn cmd_collapse(opts: &CollapseOptions) -> CliResult<CollapseRow> {
    if !(opts.time_scale > 0.0) {
        return Err(CliError::Config(format!("time scale must be positive, got {}", opts.time_scale)));
    }
    let mut hashed = Vec::new();
    let data = load(&opts.inputs, opts.sizes.as_deref(), opts.time_scale, &mut hashed)?;
    let ideal = if opts.ideal.is_empty() {
        None
    } else {
        Some(load(&opts.ideal, opts.sizes.as_deref(), opts.time_scale, &mut hashed)?)
    };
    let settings = format!("{:?} {:?} {:?} {:?} {}", opts.time_scale, opts.a_range, opts.b_range, opts.fixed, opts.no_optimize);
    let prov = Provenance::of_inputs(hashed.iter().map(|b| b.as_slice()).chain([settings.as_bytes()]));

    let (a, b) = opts.fixed;
    let fixed = collapse_measure(&data, a, b).context(|| format!("collapse at a = {a}, b = {b}"))?;
    let opt = if opts.no_optimize {
        None
    } else {
        Some(optimize_collapse(&data, opts.a_range, opts.b_range).context(|| "exponent search".into())?)
    };
    let (measure_ideal_fixed, q) = match &ideal {
        Some(id) => (
            Some(collapse_measure(id, a, b).context(|| "ideal collapse".into())?.measure),
            Some(quality_factor(&data, id, a, b).context(|| "quality factor".into())?),
        ),
        None => (None, None),
    };
    let row = CollapseRow {
        a_opt: opt.as_ref().map(|o| o.result.a),
        b_opt: opt.as_ref().map(|o| o.result.b),
        measure_opt: opt.as_ref().map(|o| o.result.measure),
        n_overlap_opt: opt.as_ref().map(|o| o.result.n_overlap),
        warnings: opt.as_ref().map(|o| warning_text(&o.warnings)).unwrap_or_default(),
        a_fixed: a,
        b_fixed: b,
        measure_fixed: fixed.measure,
        measure_ideal_fixed,
        quality_factor: q,
        config_hash: prov.config_hash.clone(),
        version: prov.version.to_string(),
    };

    let out = ensure_dir(&opts.output)?;
    write_bytes(&out.join("collapse.csv"), &csv_bytes(std::slice::from_ref(&row))?)?;
    let mut exps = vec![(a, b)];
    if let Some(o) = &opt {
        exps.push((o.result.a, o.result.b));
    }
    let mut points = Vec::new();
    let mut panels = Vec::new();
    for &(ea, eb) in &exps {
        let rescaled = data.rescaled(ea, eb);
        let mut series = Vec::new();
        for (set, pts) in data.sets().iter().zip(&rescaled) {
            points.extend(pts.iter().map(|&(x, y)| PointRow { eta: set.size, x, y, a: ea, b: eb }));
            series.push(Series::line(format!("eta = {}", set.size), pts.clone()));
        }
        panels.push(Panel {
            title: format!("a = {ea:.3}, b = {eb:.3}"),
            x_label: "h / L^b".into(),
            y_label: "A / h^a".into(),
            x_scale: Scale::Log10,
            y_scale: Scale::Log10,
            series,
        });
    }
    write_bytes(&out.join("collapse_points.csv"), &csv_bytes(&points)?)?;
    write_svg(&out.join("collapse.svg"), &panels)?;
    Ok(row)
}
