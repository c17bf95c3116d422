//! Fisher information re-derived from stored records at a new step.

use std::io::BufReader;
use std::path::PathBuf;

use rabisense::dynamics::{read_records, Parameter};
use rabisense::inference::{fisher_from_records, FisherEstimate};

use crate::commands::fisher::fisher_csv;
use crate::error::{CliError, CliResult, Context};
use crate::output::{ensure_dir, read_bytes, write_bytes, Provenance};

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub records: PathBuf,
    pub delta: f64,
    pub parameter: Parameter,
    pub checkpoints: Vec<f64>,
    /// Written into the `eta` column.
    pub eta: f64,
    pub workers: usize,
    pub output: PathBuf,
}

pub fn cmd_replay(opts: &ReplayOptions) -> CliResult<FisherEstimate> {
    if !(opts.delta > 0.0) {
        return Err(CliError::Config(format!("delta must be positive, got {}", opts.delta)));
    }
    let bytes = read_bytes(&opts.records)?;
    let records = read_records(&mut BufReader::new(bytes.as_slice())).context(|| opts.records.display().to_string())?;
    let est = fisher_from_records(&records, opts.parameter, opts.delta, &opts.checkpoints, opts.workers)
        .context(|| format!("replay at delta = {}", opts.delta))?;
    let settings = format!("{:?} {:?} {:?}", opts.delta, opts.parameter, opts.checkpoints);
    let prov = Provenance::of_inputs([bytes.as_slice(), settings.as_bytes()]);
    let out = ensure_dir(&opts.output)?;
    write_bytes(&out.join("replay.csv"), &fisher_csv(opts.eta, &est, &prov)?)?;
    Ok(est)
}
