use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::ids::{Fact, Vocab};

use super::EdgeIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(Error::Precondition(format!("unknown split {s:?}"))),
        }
    }
}

/// Entities, relations and three disjoint edge splits.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    pub entities: Vocab,
    pub relations: Vocab,
    pub train: Vec<Fact>,
    pub valid: Vec<Fact>,
    pub test: Vec<Fact>,
}

impl KnowledgeGraph {
    pub fn new(entities: Vocab, relations: Vocab, train: Vec<Fact>, valid: Vec<Fact>, test: Vec<Fact>) -> Result<Self> {
        let train_set: BTreeSet<Fact> = train.iter().copied().collect();
        for f in train.iter().chain(&valid).chain(&test) {
            if f.head.index() >= entities.len() || f.tail.index() >= entities.len() {
                return Err(Error::MissingId { kind: "entity", id: f.head.index().max(f.tail.index()) });
            }
            if f.relation.index() >= relations.len() {
                return Err(Error::MissingId { kind: "relation", id: f.relation.index() });
            }
        }
        if let Some(f) = valid.iter().chain(&test).find(|f| train_set.contains(f)) {
            return Err(Error::Precondition(format!(
                "held-out edge ({}, {}, {}) also appears in train",
                f.head, f.relation, f.tail
            )));
        }
        Ok(KnowledgeGraph { entities, relations, train, valid, test })
    }

    pub fn split(&self, s: Split) -> &[Fact] {
        match s {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Edges observable when answering queries of `split` (the "easy" graph)
    /// and the edges defining their full answer sets.
    ///
    /// Train: both are the train edges. Valid: train vs. train + valid.
    /// Test: train + valid vs. all edges.
    pub fn graphs_for(&self, split: Split) -> (EdgeIndex, EdgeIndex) {
        let train = self.train.iter();
        match split {
            Split::Train => (EdgeIndex::from_facts(train.clone()), EdgeIndex::from_facts(train)),
            Split::Valid => (EdgeIndex::from_facts(train.clone()), EdgeIndex::from_facts(train.chain(&self.valid))),
            Split::Test => (
                EdgeIndex::from_facts(train.clone().chain(&self.valid)),
                EdgeIndex::from_facts(train.chain(&self.valid).chain(&self.test)),
            ),
        }
    }
}
