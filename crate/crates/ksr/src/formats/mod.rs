//! On-disk formats: corpus records, contextual vectors, checkpoints, KG
//! splits, query dumps and reports.

pub mod checkpoint;
pub mod corpus;
pub mod kg;
pub mod queries;
pub mod vectors;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

/// Writes one JSON value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let f = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(f);
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| CliError::Runtime(e.to_string()))?;
        w.write_all(b"\n").map_err(CliError::io(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    std::fs::write(path, s).map_err(CliError::io(path))
}
