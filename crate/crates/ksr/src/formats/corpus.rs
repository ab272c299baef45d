//! Line-delimited JSON corpus records:
//! `{"id", "tokens", "mentions": [{"entity", "start", "end"}], "triplets": [{"head", "relation", "tail"}]}`.

use std::io::BufRead;
use std::path::Path;

use ksr_core::corpus::{Corpus, CorpusBuilder, RawDocument, RawMention, RawTriplet};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    tokens: Vec<String>,
    #[serde(default)]
    mentions: Vec<MentionRecord>,
    #[serde(default)]
    triplets: Vec<TripletRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MentionRecord {
    entity: String,
    start: usize,
    end: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TripletRecord {
    head: String,
    relation: String,
    tail: String,
}

/// Parses a corpus from a reader. Blank lines are ignored; errors carry the
/// 1-based line number.
pub fn read_corpus(reader: impl BufRead) -> Result<Corpus> {
    let mut builder = CorpusBuilder::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| CliError::Runtime(format!("line {n}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Record =
            serde_json::from_str(&line).map_err(|e| CliError::Validation(format!("line {n}: malformed record: {e}")))?;
        let raw = RawDocument {
            id: r.id,
            tokens: r.tokens,
            mentions: r.mentions.into_iter().map(|m| RawMention { entity: m.entity, start: m.start, end: m.end }).collect(),
            triplets: r.triplets.into_iter().map(|t| RawTriplet { head: t.head, relation: t.relation, tail: t.tail }).collect(),
        };
        builder.push(n, raw)?;
    }
    Ok(builder.finish()?)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let f = std::fs::File::open(path).map_err(CliError::io(path))?;
    read_corpus(std::io::BufReader::new(f)).map_err(|e| e.in_file(path))
}
