//! Contextual vector files. Each document is a JSON header line
//! `{"id", "rows", "dim", "relation_spans"?: {relation: [start, end]}}`
//! followed by `rows` lines of `dim` whitespace-separated floats.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use ksr_core::linalg::Matrix;
use ksr_core::params::{ContextualVectors, DocVectors};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    id: String,
    rows: usize,
    dim: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    relation_spans: BTreeMap<String, (usize, usize)>,
}

pub fn read_vectors(reader: impl BufRead) -> Result<ContextualVectors> {
    let bad = |n: usize, m: String| CliError::Validation(format!("line {n}: {m}"));
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut out: Option<ContextualVectors> = None;
    while let Some((n, line)) = lines.next() {
        let line = line.map_err(|e| CliError::Runtime(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let h: Header = serde_json::from_str(&line).map_err(|e| bad(n, format!("malformed header: {e}")))?;
        let vectors = out.get_or_insert_with(|| ContextualVectors::new(h.dim));
        if h.dim != vectors.dim() {
            return Err(bad(n, format!("document {:?} has dim {} but the file uses dim {}", h.id, h.dim, vectors.dim())));
        }
        let mut data = Vec::with_capacity(h.rows * h.dim);
        for _ in 0..h.rows {
            let Some((n, row)) = lines.next() else {
                return Err(bad(n, format!("document {:?} ends before its {} rows", h.id, h.rows)));
            };
            let row = row.map_err(|e| CliError::Runtime(e.to_string()))?;
            let before = data.len();
            for tok in row.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|e| bad(n, format!("{tok:?}: {e}")))?);
            }
            if data.len() - before != h.dim {
                return Err(bad(n, format!("expected {} values, found {}", h.dim, data.len() - before)));
            }
        }
        if vectors.get(&h.id).is_some() {
            return Err(bad(n, format!("duplicate document {:?}", h.id)));
        }
        let doc = DocVectors { rows: Matrix::from_vec(h.rows, h.dim, data), relation_spans: h.relation_spans };
        vectors.insert(h.id, doc).map_err(|e| bad(n, e.to_string()))?;
    }
    Ok(out.unwrap_or_else(|| ContextualVectors::new(0)))
}

pub fn load_vectors(path: &Path) -> Result<ContextualVectors> {
    let f = std::fs::File::open(path).map_err(CliError::io(path))?;
    read_vectors(std::io::BufReader::new(f)).map_err(|e| e.in_file(path))
}

pub fn write_vectors(mut w: impl Write, vectors: &ContextualVectors) -> std::io::Result<()> {
    for (id, doc) in vectors.docs() {
        let h =
            Header { id: id.clone(), rows: doc.rows.rows(), dim: doc.rows.cols(), relation_spans: doc.relation_spans.clone() };
        writeln!(w, "{}", serde_json::to_string(&h).map_err(std::io::Error::other)?)?;
        for r in 0..doc.rows.rows() {
            let row: Vec<String> = doc.rows.row(r).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    Ok(())
}
