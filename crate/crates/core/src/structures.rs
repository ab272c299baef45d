//! The four elementary knowledge structures and their structured queries.
//!
//! Given the triplets of one sequence:
//!
//! - every triplet is a *simple triplet* (query `h -r-> ?`, answer `t`);
//! - `(a, r1, b), (b, r2, c)` with `a != c` is a *two-step path*
//!   (query `a -r1-> . -r2-> ?`, answer `c`, the middle entity is dropped);
//! - `(a, r1, b), (a, r2, c)` with `b != c` is an *outward intersection*
//!   (query `b -r1^-1-> ? <-r2^-1- c`, answer `a`);
//! - `(b, r1, a), (c, r2, a)` with `b != c` is an *inward intersection*
//!   (query `b -r1-> ? <-r2- c`, answer `a`).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::Result;
use crate::ids::{EntityId, Fact};
use crate::query::{DagBuilder, Direction, QueryDag};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StructureKind {
    SimpleTriplet,
    TwoStepPath,
    OutwardIntersect,
    InwardIntersect,
}

impl StructureKind {
    pub fn name(self) -> &'static str {
        match self {
            StructureKind::SimpleTriplet => "simple",
            StructureKind::TwoStepPath => "path",
            StructureKind::OutwardIntersect => "outward",
            StructureKind::InwardIntersect => "inward",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KnowledgeStructure {
    SimpleTriplet(Fact),
    /// `first.tail == second.head`
    TwoStepPath(Fact, Fact),
    /// Shared head, distinct tails.
    OutwardIntersect(Fact, Fact),
    /// Shared tail, distinct heads.
    InwardIntersect(Fact, Fact),
}

impl KnowledgeStructure {
    pub fn kind(&self) -> StructureKind {
        match self {
            KnowledgeStructure::SimpleTriplet(_) => StructureKind::SimpleTriplet,
            KnowledgeStructure::TwoStepPath(..) => StructureKind::TwoStepPath,
            KnowledgeStructure::OutwardIntersect(..) => StructureKind::OutwardIntersect,
            KnowledgeStructure::InwardIntersect(..) => StructureKind::InwardIntersect,
        }
    }

    pub fn facts(&self) -> Vec<Fact> {
        match *self {
            KnowledgeStructure::SimpleTriplet(f) => alloc::vec![f],
            KnowledgeStructure::TwoStepPath(a, b)
            | KnowledgeStructure::OutwardIntersect(a, b)
            | KnowledgeStructure::InwardIntersect(a, b) => alloc::vec![a, b],
        }
    }

    pub fn is_complex(&self) -> bool {
        self.kind() != StructureKind::SimpleTriplet
    }
}

/// Counts per kind, in declaration order of [`StructureKind`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StructureCounts {
    pub simple: usize,
    pub path: usize,
    pub outward: usize,
    pub inward: usize,
}

impl StructureCounts {
    pub fn of(structures: &[KnowledgeStructure]) -> Self {
        let mut c = StructureCounts::default();
        for s in structures {
            match s.kind() {
                StructureKind::SimpleTriplet => c.simple += 1,
                StructureKind::TwoStepPath => c.path += 1,
                StructureKind::OutwardIntersect => c.outward += 1,
                StructureKind::InwardIntersect => c.inward += 1,
            }
        }
        c
    }

    pub fn add(&mut self, other: StructureCounts) {
        self.simple += other.simple;
        self.path += other.path;
        self.outward += other.outward;
        self.inward += other.inward;
    }
}

/// Enumerates every knowledge structure over `facts`.
///
/// Duplicate facts are collapsed first (first occurrence wins). The output is
/// grouped by kind and, within a kind, sorted by the positions of the
/// constituent facts in the deduplicated input.
pub fn mine_structures(facts: &[Fact]) -> Vec<KnowledgeStructure> {
    let mut seen = BTreeSet::new();
    let facts: Vec<Fact> = facts.iter().copied().filter(|f| seen.insert(*f)).collect();

    let mut by_head: BTreeMap<EntityId, Vec<usize>> = BTreeMap::new();
    let mut by_tail: BTreeMap<EntityId, Vec<usize>> = BTreeMap::new();
    for (i, f) in facts.iter().enumerate() {
        by_head.entry(f.head).or_default().push(i);
        by_tail.entry(f.tail).or_default().push(i);
    }

    let mut keyed: Vec<(StructureKind, usize, usize, KnowledgeStructure)> = Vec::new();
    for (i, f) in facts.iter().enumerate() {
        keyed.push((StructureKind::SimpleTriplet, i, i, KnowledgeStructure::SimpleTriplet(*f)));
        if let Some(next) = by_head.get(&f.tail) {
            for &j in next {
                let g = facts[j];
                if j != i && f.head != g.tail {
                    keyed.push((StructureKind::TwoStepPath, i, j, KnowledgeStructure::TwoStepPath(*f, g)));
                }
            }
        }
    }
    for group in by_head.values() {
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[a + 1..] {
                if facts[i].tail != facts[j].tail {
                    keyed.push((StructureKind::OutwardIntersect, i, j, KnowledgeStructure::OutwardIntersect(facts[i], facts[j])));
                }
            }
        }
    }
    for group in by_tail.values() {
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[a + 1..] {
                if facts[i].head != facts[j].head {
                    keyed.push((StructureKind::InwardIntersect, i, j, KnowledgeStructure::InwardIntersect(facts[i], facts[j])));
                }
            }
        }
    }
    keyed.sort_by_key(|&(k, i, j, _)| (k, i, j));
    keyed.into_iter().map(|(.., s)| s).collect()
}

/// Converts a structure into its query DAG and designated answer.
pub fn build_query(structure: &KnowledgeStructure) -> Result<(QueryDag, EntityId)> {
    let mut b = DagBuilder::new();
    let (answer_node, answer) = match *structure {
        KnowledgeStructure::SimpleTriplet(f) => {
            let a = b.anchor(f.head);
            (b.forward(a, f.relation), f.tail)
        }
        KnowledgeStructure::TwoStepPath(f, g) => {
            let a = b.anchor(f.head);
            let mid = b.forward(a, f.relation);
            (b.forward(mid, g.relation), g.tail)
        }
        KnowledgeStructure::InwardIntersect(f, g) => {
            let a1 = b.anchor(f.head);
            let p1 = b.forward(a1, f.relation);
            let a2 = b.anchor(g.head);
            let p2 = b.forward(a2, g.relation);
            (b.intersect(&[p1, p2]), f.tail)
        }
        KnowledgeStructure::OutwardIntersect(f, g) => {
            let a1 = b.anchor(f.tail);
            let p1 = b.project(a1, f.relation, Direction::Inverse);
            let a2 = b.anchor(g.tail);
            let p2 = b.project(a2, g.relation, Direction::Inverse);
            (b.intersect(&[p1, p2]), f.head)
        }
    };
    Ok((b.finish(answer_node)?, answer))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAnswer {
    pub dag: QueryDag,
    pub answer: EntityId,
    pub structure: KnowledgeStructure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub simple: QueryAnswer,
    pub complex: Option<QueryAnswer>,
}

/// Draws one simple structure and, when any exist, one complex structure,
/// each uniformly. `None` means the structure list holds no simple triplet
/// and the sequence should be skipped.
pub fn sample_from_structures(structures: &[KnowledgeStructure], rng: &mut Rng) -> Result<Option<TrainingPair>> {
    let simple: Vec<&KnowledgeStructure> = structures.iter().filter(|s| !s.is_complex()).collect();
    if simple.is_empty() {
        return Ok(None);
    }
    let complex: Vec<&KnowledgeStructure> = structures.iter().filter(|s| s.is_complex()).collect();
    let s = simple[rng.random_range(0..simple.len())];
    let c = if complex.is_empty() { None } else { Some(complex[rng.random_range(0..complex.len())]) };
    let to_qa = |s: &KnowledgeStructure| -> Result<QueryAnswer> {
        let (dag, answer) = build_query(s)?;
        Ok(QueryAnswer { dag, answer, structure: *s })
    };
    Ok(Some(TrainingPair { simple: to_qa(s)?, complex: c.map(to_qa).transpose()? }))
}

/// Mines `facts` and samples a training pair; `None` signals an empty sequence.
pub fn sample_training_pair(facts: &[Fact], rng: &mut Rng) -> Result<Option<TrainingPair>> {
    sample_from_structures(&mine_structures(facts), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::RelationId;
    use crate::query::Node;
    use crate::rng::{stream, Stream};
    use alloc::vec;

    const A: EntityId = EntityId(0);
    const B: EntityId = EntityId(1);
    const C: EntityId = EntityId(2);

    fn f(h: EntityId, r: u32, t: EntityId) -> Fact {
        Fact::new(h, RelationId(r), t)
    }

    pub(crate) fn fixture() -> Vec<Fact> {
        vec![f(A, 1, B), f(B, 2, C), f(A, 3, C)]
    }

    #[test]
    fn empty_input_mines_nothing() {
        assert!(mine_structures(&[]).is_empty());
    }

    #[test]
    fn three_triplet_fixture() {
        let s = mine_structures(&fixture());
        assert_eq!(StructureCounts::of(&s), StructureCounts { simple: 3, path: 1, outward: 1, inward: 1 });
        assert!(s.contains(&KnowledgeStructure::TwoStepPath(f(A, 1, B), f(B, 2, C))));
        assert!(s.contains(&KnowledgeStructure::OutwardIntersect(f(A, 1, B), f(A, 3, C))));
        assert!(s.contains(&KnowledgeStructure::InwardIntersect(f(B, 2, C), f(A, 3, C))));
    }

    #[test]
    fn duplicates_collapse() {
        let s = mine_structures(&[f(A, 1, B), f(A, 1, B)]);
        assert_eq!(s, vec![KnowledgeStructure::SimpleTriplet(f(A, 1, B))]);
    }

    #[test]
    fn two_cycle_is_not_a_path() {
        let s = mine_structures(&[f(A, 1, B), f(B, 2, A)]);
        assert_eq!(StructureCounts::of(&s).path, 0);
    }

    #[test]
    fn simple_query_shape() {
        let (dag, ans) = build_query(&KnowledgeStructure::SimpleTriplet(f(A, 7, B))).unwrap();
        assert_eq!(ans, B);
        assert_eq!(dag.anchors(), vec![(0, A)]);
        let e = dag.edges();
        assert_eq!(e.len(), 1);
        assert_eq!((e[0].relation, e[0].direction), (RelationId(7), Direction::Forward));
        assert_eq!(e[0].to, dag.answer_node());
    }

    #[test]
    fn path_query_drops_middle_entity() {
        let (dag, ans) = build_query(&KnowledgeStructure::TwoStepPath(f(A, 1, B), f(B, 2, C))).unwrap();
        assert_eq!(ans, C);
        assert_eq!(dag.anchors(), vec![(0, A)]);
        assert!(!dag.nodes().contains(&Node::Anchor(B)));
        assert_eq!(dag.edges().len(), 2);
    }

    #[test]
    fn outward_query_uses_inverse_edges() {
        let (dag, ans) = build_query(&KnowledgeStructure::OutwardIntersect(f(A, 1, B), f(A, 3, C))).unwrap();
        assert_eq!(ans, A);
        let anchors: Vec<EntityId> = dag.anchors().into_iter().map(|(_, e)| e).collect();
        assert_eq!(anchors, vec![B, C]);
        assert!(dag.edges().iter().all(|e| e.direction == Direction::Inverse));
        assert!(matches!(dag.nodes()[dag.answer_node()], Node::Intersection(_)));
    }

    #[test]
    fn build_query_is_pure() {
        for s in mine_structures(&fixture()) {
            assert_eq!(build_query(&s).unwrap(), build_query(&s).unwrap());
        }
    }

    #[test]
    fn single_triplet_sequence_has_no_complex_slot() {
        let mut rng = stream(3, Stream::Mining);
        let p = sample_training_pair(&[f(A, 1, B)], &mut rng).unwrap().unwrap();
        assert_eq!(p.simple.answer, B);
        assert!(p.complex.is_none());
    }

    #[test]
    fn empty_sequence_signals_skip() {
        let mut rng = stream(3, Stream::Mining);
        assert!(sample_training_pair(&[], &mut rng).unwrap().is_none());
    }

    #[test]
    fn fixed_seed_sampling_is_deterministic() {
        let draw = || {
            let mut rng = stream(11, Stream::Mining);
            sample_training_pair(&fixture(), &mut rng).unwrap().unwrap()
        };
        let p = draw();
        assert_eq!(p, draw());
        assert!(p.complex.is_some());
    }
}
