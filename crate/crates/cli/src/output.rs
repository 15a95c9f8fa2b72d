//! Output files: atomic writes and the records CSV.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use diana_core::RunRecord;

/// Environment variable that overrides the output directory of the config.
pub const OUT_DIR_ENV: &str = "DIANA_OUT_DIR";

/// `--out`, then [`OUT_DIR_ENV`], then `run.out`, then `./out`.
pub fn out_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    configured
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// One CSV row. Column order is fixed:
/// `seed,k,objective,grad_norm,lyapunov,lambda,bits_uplink,diverged`.
/// Missing values are empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub seed: u64,
    pub k: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub lyapunov: Option<f64>,
    pub lambda: Option<f64>,
    pub bits_uplink: u64,
    pub diverged: bool,
}

pub const CSV_HEADER: &str = "seed,k,objective,grad_norm,lyapunov,lambda,bits_uplink,diverged";

impl From<&RunRecord> for RecordRow {
    fn from(r: &RunRecord) -> Self {
        RecordRow {
            seed: r.seed,
            k: r.k,
            objective: r.objective,
            grad_norm: r.grad_norm,
            lyapunov: r.lyapunov,
            lambda: r.lambda,
            bits_uplink: r.bits_uplink,
            diverged: r.diverged,
        }
    }
}

pub fn records_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(RecordRow::from(r))?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    Ok(w.into_inner()?)
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<RecordRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        anyhow::bail!("unexpected header {:?}", header.join(","));
    }
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}
