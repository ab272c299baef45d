use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::ids::{EntityId, Fact, RelationId};
use crate::query::{QueryDag, QueryType};
use crate::rng::Rng;

use super::{brute_force_answers, EdgeIndex, KnowledgeGraph, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedQuery {
    pub qtype: QueryType,
    pub dag: QueryDag,
    /// Answers reachable in the graph visible for this split.
    pub answers_train: BTreeSet<EntityId>,
    /// Answers over the full graph for this split.
    pub answers_full: BTreeSet<EntityId>,
}

impl GeneratedQuery {
    /// Answers that only the held-out edges reveal.
    pub fn hard_answers(&self) -> Vec<EntityId> {
        self.answers_full.difference(&self.answers_train).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub queries: Vec<GeneratedQuery>,
    /// Set when fewer than the requested number of queries were found.
    pub warning: Option<String>,
}

/// Samples `count` distinct queries of shape `qtype` for `split`.
///
/// Each attempt picks a random edge of the split as the last hop into the
/// target and grows the remaining branches backwards along random incoming
/// edges of the full graph, so every query has at least one answer. Eval
/// splits reject queries without a hard answer. Only the five training
/// shapes are allowed for the train split.
pub fn generate_queries(kg: &KnowledgeGraph, qtype: QueryType, count: usize, split: Split, rng: &mut Rng) -> Result<Generation> {
    if split == Split::Train && !qtype.is_trainable() {
        return Err(Error::Precondition(format!("query type {qtype} is evaluation-only")));
    }
    let seeds = kg.split(split);
    let (easy, full) = kg.graphs_for(split);
    let mut queries = Vec::new();
    if seeds.is_empty() {
        return Ok(Generation { queries, warning: Some(format!("no {split} edges to seed {qtype} queries")) });
    }
    let budget = 1000usize.max(count.saturating_mul(200));
    let mut seen = BTreeSet::new();
    let mut attempts = 0;
    while queries.len() < count && attempts < budget {
        attempts += 1;
        let seed = seeds[rng.random_range(0..seeds.len())];
        let Some((anchors, rels)) = sample_shape(qtype, seed, &full, rng) else { continue };
        let dag = qtype.build(&anchors, &rels)?;
        if seen.contains(&dag) {
            continue;
        }
        let answers_full = brute_force_answers(&dag, &full);
        let answers_train = brute_force_answers(&dag, &easy);
        if answers_full.is_empty() || (split != Split::Train && answers_full.len() == answers_train.len()) {
            continue;
        }
        seen.insert(dag.clone());
        queries.push(GeneratedQuery { qtype, dag, answers_train, answers_full });
    }
    let warning = (queries.len() < count)
        .then(|| format!("found {} of {count} {qtype} {split} queries within {budget} attempts", queries.len()));
    Ok(Generation { queries, warning })
}

/// Walks `hops` edges backwards from `target`; returns the anchor and the
/// relations in forward order.
fn walk_back(target: EntityId, hops: usize, g: &EdgeIndex, rng: &mut Rng) -> Option<(EntityId, Vec<RelationId>)> {
    let mut cur = target;
    let mut rels = Vec::with_capacity(hops);
    for _ in 0..hops {
        let inc = g.incoming(cur);
        if inc.is_empty() {
            return None;
        }
        let (h, r) = inc[rng.random_range(0..inc.len())];
        rels.push(r);
        cur = h;
    }
    rels.reverse();
    Some((cur, rels))
}

/// `n` distinct one-hop branches into `target`, the first being `first`.
fn branches_into(
    target: EntityId,
    first: (EntityId, RelationId),
    n: usize,
    g: &EdgeIndex,
    rng: &mut Rng,
) -> Option<Vec<(EntityId, RelationId)>> {
    let inc = g.incoming(target);
    let mut out = vec![first];
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        if tries > 4 * inc.len() + 8 {
            return None;
        }
        let b = inc[rng.random_range(0..inc.len())];
        if !out.contains(&b) {
            out.push(b);
        }
    }
    Some(out)
}

fn sample_shape(qtype: QueryType, seed: Fact, g: &EdgeIndex, rng: &mut Rng) -> Option<(Vec<EntityId>, Vec<RelationId>)> {
    let last = (seed.head, seed.relation);
    match qtype {
        QueryType::P1 => Some((vec![seed.head], vec![seed.relation])),
        QueryType::P2 | QueryType::P3 => {
            let extra = if qtype == QueryType::P2 { 1 } else { 2 };
            let (anchor, mut rels) = walk_back(seed.head, extra, g, rng)?;
            rels.push(seed.relation);
            Some((vec![anchor], rels))
        }
        QueryType::I2 | QueryType::I3 | QueryType::U2 => {
            let n = if qtype == QueryType::I3 { 3 } else { 2 };
            let b = branches_into(seed.tail, last, n, g, rng)?;
            Some(b.into_iter().unzip())
        }
        QueryType::IP | QueryType::UP => {
            let inc = g.incoming(seed.head);
            if inc.is_empty() {
                return None;
            }
            let first = inc[rng.random_range(0..inc.len())];
            let b = branches_into(seed.head, first, 2, g, rng)?;
            let (anchors, mut rels): (Vec<_>, Vec<_>) = b.into_iter().unzip();
            rels.push(seed.relation);
            Some((anchors, rels))
        }
        QueryType::PI => {
            let b = branches_into(seed.tail, last, 2, g, rng)?;
            // branch 0 becomes a two-hop chain ending with the seed edge
            let (a0, mut chain) = walk_back(b[0].0, 1, g, rng)?;
            chain.push(b[0].1);
            chain.push(b[1].1);
            Some((vec![a0, b[1].0], chain))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::Vocab;
    use crate::rng::{stream, Stream};

    fn f(h: u32, r: u32, t: u32) -> Fact {
        Fact::new(EntityId(h), RelationId(r), EntityId(t))
    }

    fn chain_kg() -> KnowledgeGraph {
        // A -r1-> B -r2-> C, with B -r2-> C held out for test
        KnowledgeGraph::new(
            Vocab::from_names(["A", "B", "C"]),
            Vocab::from_names(["r1", "r2"]),
            vec![f(0, 0, 1)],
            vec![],
            vec![f(1, 1, 2)],
        )
        .unwrap()
    }

    #[test]
    fn eval_only_types_rejected_for_train() {
        let mut rng = stream(0, Stream::QueryGen);
        assert!(generate_queries(&chain_kg(), QueryType::IP, 1, Split::Train, &mut rng).is_err());
        assert!(generate_queries(&chain_kg(), QueryType::I3, 0, Split::Train, &mut rng).is_ok());
    }

    #[test]
    fn only_two_hop_query_from_a() {
        let mut rng = stream(0, Stream::QueryGen);
        let g = generate_queries(&chain_kg(), QueryType::P2, 5, Split::Test, &mut rng).unwrap();
        assert_eq!(g.queries.len(), 1);
        assert!(g.warning.is_some());
        let q = &g.queries[0];
        assert_eq!(q.dag.as_path().unwrap().0, EntityId(0));
        assert_eq!(q.answers_full, BTreeSet::from([EntityId(2)]));
        assert!(q.answers_train.is_empty());
    }

    #[test]
    fn one_hop_queries_come_from_split_edges() {
        let kg = KnowledgeGraph::new(
            Vocab::from_names(["a", "b", "c", "d"]),
            Vocab::from_names(["r"]),
            vec![f(0, 0, 1)],
            vec![],
            vec![f(0, 0, 2), f(3, 0, 2)],
        )
        .unwrap();
        let mut rng = stream(1, Stream::QueryGen);
        let g = generate_queries(&kg, QueryType::P1, 10, Split::Test, &mut rng).unwrap();
        assert_eq!(g.queries.len(), 2);
        for q in &g.queries {
            let (anchor, path) = q.dag.as_path().unwrap();
            let tails: BTreeSet<EntityId> =
                kg.train.iter().chain(&kg.test).filter(|x| x.head == anchor && x.relation == path[0].0).map(|x| x.tail).collect();
            assert_eq!(q.answers_full, tails);
        }
    }

    #[test]
    fn overlapping_splits_rejected() {
        assert!(KnowledgeGraph::new(
            Vocab::from_names(["a", "b"]),
            Vocab::from_names(["r"]),
            vec![f(0, 0, 1)],
            vec![f(0, 0, 1)],
            vec![]
        )
        .is_err());
    }
}
