//! Generated-query dumps: one `{"type", "dag", "answers_train", "answers_full"}`
//! record per line, with entities and relations referenced by name.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use ksr_core::evalgen::GeneratedQuery;
use ksr_core::ids::{EntityId, RelationId, Vocab};
use ksr_core::query::{Direction, Node, QueryDag, QueryType};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRecord {
    Anchor(String),
    Project { input: usize, relation: String, direction: DirectionRecord },
    Intersect(Vec<usize>),
    Union(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionRecord {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagRecord {
    pub nodes: Vec<NodeRecord>,
    pub answer: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRecord {
    #[serde(rename = "type")]
    pub qtype: String,
    pub dag: DagRecord,
    pub answers_train: Vec<String>,
    pub answers_full: Vec<String>,
}

fn name(v: &Vocab, id: u32) -> String {
    v.name(id).map_or_else(|| format!("#{id}"), str::to_owned)
}

pub fn dag_record(dag: &QueryDag, entities: &Vocab, relations: &Vocab) -> DagRecord {
    let nodes = dag
        .nodes()
        .iter()
        .map(|n| match n {
            Node::Anchor(e) => NodeRecord::Anchor(name(entities, e.0)),
            Node::Projection { input, relation, direction } => NodeRecord::Project {
                input: *input,
                relation: name(relations, relation.0),
                direction: match direction {
                    Direction::Forward => DirectionRecord::Forward,
                    Direction::Inverse => DirectionRecord::Inverse,
                },
            },
            Node::Intersection(v) => NodeRecord::Intersect(v.clone()),
            Node::Union(v) => NodeRecord::Union(v.clone()),
        })
        .collect();
    DagRecord { nodes, answer: dag.answer_node() }
}

pub fn to_record(q: &GeneratedQuery, entities: &Vocab, relations: &Vocab) -> QueryRecord {
    let names = |s: &BTreeSet<EntityId>| s.iter().map(|e| name(entities, e.0)).collect();
    QueryRecord {
        qtype: q.qtype.name().to_owned(),
        dag: dag_record(&q.dag, entities, relations),
        answers_train: names(&q.answers_train),
        answers_full: names(&q.answers_full),
    }
}

pub fn from_record(r: &QueryRecord, entities: &Vocab, relations: &Vocab) -> Result<GeneratedQuery> {
    let entity = |n: &str| entities.get(n).map(EntityId).ok_or_else(|| CliError::Validation(format!("unknown entity {n:?}")));
    let relation =
        |n: &str| relations.get(n).map(RelationId).ok_or_else(|| CliError::Validation(format!("unknown relation {n:?}")));
    let nodes = r
        .dag
        .nodes
        .iter()
        .map(|n| {
            Ok(match n {
                NodeRecord::Anchor(e) => Node::Anchor(entity(e)?),
                NodeRecord::Project { input, relation: rel, direction } => Node::Projection {
                    input: *input,
                    relation: relation(rel)?,
                    direction: match direction {
                        DirectionRecord::Forward => Direction::Forward,
                        DirectionRecord::Inverse => Direction::Inverse,
                    },
                },
                NodeRecord::Intersect(v) => Node::Intersection(v.clone()),
                NodeRecord::Union(v) => Node::Union(v.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let set = |v: &[String]| v.iter().map(|n| entity(n)).collect::<Result<BTreeSet<_>>>();
    let answers_train = set(&r.answers_train)?;
    let answers_full = set(&r.answers_full)?;
    if !answers_train.is_subset(&answers_full) {
        return Err(CliError::Validation("answers_train is not contained in answers_full".into()));
    }
    Ok(GeneratedQuery {
        qtype: r.qtype.parse::<QueryType>()?,
        dag: QueryDag::new(nodes, r.dag.answer)?,
        answers_train,
        answers_full,
    })
}

pub fn read_queries(reader: impl BufRead, entities: &Vocab, relations: &Vocab) -> Result<Vec<GeneratedQuery>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: CliError| CliError::Validation(format!("line {}: {e}", i + 1));
        let rec: QueryRecord = serde_json::from_str(&line).map_err(|e| at(CliError::Validation(e.to_string())))?;
        out.push(from_record(&rec, entities, relations).map_err(at)?);
    }
    Ok(out)
}

pub fn load_queries(path: &Path, entities: &Vocab, relations: &Vocab) -> Result<Vec<GeneratedQuery>> {
    let f = std::fs::File::open(path).map_err(CliError::io(path))?;
    read_queries(std::io::BufReader::new(f), entities, relations).map_err(|e| e.in_file(path))
}
