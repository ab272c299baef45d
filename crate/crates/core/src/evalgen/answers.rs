use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::ids::{EntityId, Fact, RelationId};
use crate::query::{Direction, Node, QueryDag};

/// Adjacency in both directions for set-semantics query evaluation.
#[derive(Debug, Clone, Default)]
pub struct EdgeIndex {
    forward: BTreeMap<(EntityId, RelationId), BTreeSet<EntityId>>,
    inverse: BTreeMap<(EntityId, RelationId), BTreeSet<EntityId>>,
    incoming: BTreeMap<EntityId, Vec<(EntityId, RelationId)>>,
    facts: BTreeSet<Fact>,
}

impl EdgeIndex {
    pub fn from_facts<'a>(facts: impl IntoIterator<Item = &'a Fact>) -> Self {
        let mut ix = EdgeIndex::default();
        for f in facts {
            if !ix.facts.insert(*f) {
                continue;
            }
            ix.forward.entry((f.head, f.relation)).or_default().insert(f.tail);
            ix.inverse.entry((f.tail, f.relation)).or_default().insert(f.head);
            ix.incoming.entry(f.tail).or_default().push((f.head, f.relation));
        }
        ix
    }

    pub fn tails(&self, head: EntityId, r: RelationId) -> Option<&BTreeSet<EntityId>> {
        self.forward.get(&(head, r))
    }

    pub fn heads(&self, tail: EntityId, r: RelationId) -> Option<&BTreeSet<EntityId>> {
        self.inverse.get(&(tail, r))
    }

    /// `(head, relation)` of every edge into `tail`, in insertion order.
    pub fn incoming(&self, tail: EntityId) -> &[(EntityId, RelationId)] {
        self.incoming.get(&tail).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, f: &Fact) -> bool {
        self.facts.contains(f)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

/// Exact answer set of `dag` over `edges`: anchors are singletons,
/// projections follow edges (reversed for inverse), intersections and unions
/// are set operations.
pub fn brute_force_answers(dag: &QueryDag, edges: &EdgeIndex) -> BTreeSet<EntityId> {
    let order = dag.topo_order().expect("validated DAG is acyclic");
    let mut sets: Vec<BTreeSet<EntityId>> = vec![BTreeSet::new(); dag.nodes().len()];
    for i in order {
        sets[i] = match &dag.nodes()[i] {
            Node::Anchor(e) => BTreeSet::from([*e]),
            Node::Projection { input, relation, direction } => {
                let mut out = BTreeSet::new();
                for &s in &sets[*input] {
                    let next = match direction {
                        Direction::Forward => edges.tails(s, *relation),
                        Direction::Inverse => edges.heads(s, *relation),
                    };
                    if let Some(n) = next {
                        out.extend(n.iter().copied());
                    }
                }
                out
            }
            Node::Intersection(inputs) => {
                let mut it = inputs.iter();
                let mut acc = sets[*it.next().expect("merge has inputs")].clone();
                for &j in it {
                    acc = acc.intersection(&sets[j]).copied().collect();
                }
                acc
            }
            Node::Union(inputs) => inputs.iter().flat_map(|&j| sets[j].iter().copied()).collect(),
        };
    }
    core::mem::take(&mut sets[dag.answer_node()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::QueryType;

    fn f(h: u32, r: u32, t: u32) -> Fact {
        Fact::new(EntityId(h), RelationId(r), EntityId(t))
    }

    #[test]
    fn one_hop_lookup() {
        let ix = EdgeIndex::from_facts(&[f(0, 0, 1), f(0, 0, 2)]);
        let q = QueryType::P1.build(&[EntityId(0)], &[RelationId(0)]).unwrap();
        assert_eq!(brute_force_answers(&q, &ix), BTreeSet::from([EntityId(1), EntityId(2)]));
    }

    #[test]
    fn intersection_by_hand() {
        // X=0 Y=1 Z=2 W=3
        let ix = EdgeIndex::from_facts(&[f(0, 1, 2), f(1, 2, 2), f(0, 1, 3)]);
        let q = QueryType::I2.build(&[EntityId(0), EntityId(1)], &[RelationId(1), RelationId(2)]).unwrap();
        assert_eq!(brute_force_answers(&q, &ix), BTreeSet::from([EntityId(2)]));
    }

    #[test]
    fn relation_without_edges_gives_empty_set() {
        let ix = EdgeIndex::from_facts(&[f(0, 0, 1)]);
        let q = QueryType::P1.build(&[EntityId(0)], &[RelationId(5)]).unwrap();
        assert!(brute_force_answers(&q, &ix).is_empty());
    }

    #[test]
    fn chain_two_hops() {
        // A -r1-> B -r2-> C
        let ix = EdgeIndex::from_facts(&[f(0, 1, 1), f(1, 2, 2)]);
        let q = QueryType::P2.build(&[EntityId(0)], &[RelationId(1), RelationId(2)]).unwrap();
        assert_eq!(brute_force_answers(&q, &ix), BTreeSet::from([EntityId(2)]));
    }
}
