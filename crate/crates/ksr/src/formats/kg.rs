//! Knowledge-graph splits as `head<TAB>relation<TAB>tail` lines in
//! `train.tsv`, `valid.tsv` and `test.tsv`.

use std::io::{BufRead, Write};
use std::path::Path;

use ksr_core::evalgen::KnowledgeGraph;
use ksr_core::ids::{EntityId, Fact, RelationId, Vocab};

use crate::error::{CliError, Result};

pub const SPLIT_FILES: [&str; 3] = ["train.tsv", "valid.tsv", "test.tsv"];

fn read_split(reader: impl BufRead, entities: &mut Vocab, relations: &mut Vocab) -> Result<Vec<Fact>> {
    let mut facts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [h, r, t] = cols[..] else {
            return Err(CliError::Validation(format!("line {}: expected 3 tab-separated fields, found {}", i + 1, cols.len())));
        };
        if h == t {
            return Err(CliError::Validation(format!("line {}: self-loop on {h:?}", i + 1)));
        }
        facts.push(Fact::new(EntityId(entities.intern(h)), RelationId(relations.intern(r)), EntityId(entities.intern(t))));
    }
    Ok(facts)
}

/// Reads the three split files of `dir`. Ids are interned in file order,
/// train first.
pub fn load_kg(dir: &Path) -> Result<KnowledgeGraph> {
    let mut entities = Vocab::new();
    let mut relations = Vocab::new();
    let mut splits = Vec::with_capacity(3);
    for name in SPLIT_FILES {
        let path = dir.join(name);
        let f = std::fs::File::open(&path).map_err(CliError::io(&path))?;
        let facts = read_split(std::io::BufReader::new(f), &mut entities, &mut relations).map_err(|e| e.in_file(&path))?;
        splits.push(facts);
    }
    let test = splits.pop().expect("three splits");
    let valid = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    Ok(KnowledgeGraph::new(entities, relations, train, valid, test)?)
}

pub fn write_kg(dir: &Path, kg: &KnowledgeGraph) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    for (name, facts) in SPLIT_FILES.iter().zip([&kg.train, &kg.valid, &kg.test]) {
        let path = dir.join(name);
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path).map_err(CliError::io(&path))?);
        for f in facts {
            let e = |id: EntityId| kg.entities.name(id.0).unwrap_or("?");
            let r = kg.relations.name(f.relation.0).unwrap_or("?");
            writeln!(w, "{}\t{}\t{}", e(f.head), r, e(f.tail)).map_err(CliError::io(&path))?;
        }
        w.flush().map_err(CliError::io(&path))?;
    }
    Ok(())
}
