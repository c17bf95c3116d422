//! Output directory helpers and provenance columns.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{io_err, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hash and version stamped into every output table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub version: &'static str,
}

impl Provenance {
    pub fn new(config_hash: String) -> Self {
        Self { config_hash, version: VERSION }
    }

    /// Hash over arbitrary byte inputs, for commands driven by files rather than a config.
    pub fn of_inputs<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> Self {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        Self::new(h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect())
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(dir.to_path_buf())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

/// Serializes rows with a header into CSV bytes.
pub fn csv_bytes<T: serde::Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| crate::error::CliError::Csv(e.into()))?;
    Ok(w.into_inner().expect("flushed"))
}

/// Tag used in file names for a system size, e.g. `10` or `7.5`.
pub fn size_tag(eta: f64) -> String {
    format!("{eta}")
}
