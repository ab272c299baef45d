//! Annotated corpus model and fixed-length sequence chunking.
//!
//! Documents arrive pre-annotated with entity mention spans (0-based,
//! inclusive) and relation triplets. [`CorpusBuilder`] validates records and
//! interns entity and relation names into dense ids in first-seen order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ids::{EntityId, Fact, RelationId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Mention {
    pub entity: EntityId,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triplet {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    /// Index of the source document in [`Corpus::documents`].
    pub doc: usize,
}

impl Triplet {
    pub fn fact(&self) -> Fact {
        Fact::new(self.head, self.relation, self.tail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<Mention>,
    pub triplets: Vec<Triplet>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub entities: Vocab,
    pub relations: Vocab,
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    pub fn triplet_count(&self) -> usize {
        self.documents.iter().map(|d| d.triplets.len()).sum()
    }

    pub fn document_index(&self, id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.id == id)
    }

    /// Every mention of every entity, as `(document index, mention)`.
    pub fn mentions_by_entity(&self) -> BTreeMap<EntityId, Vec<(usize, Mention)>> {
        let mut out: BTreeMap<EntityId, Vec<(usize, Mention)>> = BTreeMap::new();
        for (di, doc) in self.documents.iter().enumerate() {
            for m in &doc.mentions {
                out.entry(m.entity).or_default().push((di, *m));
            }
        }
        out
    }
}

/// An unvalidated record as it appears in the corpus file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawDocument {
    pub id: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<RawMention>,
    pub triplets: Vec<RawTriplet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawMention {
    pub entity: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTriplet {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Debug, Default)]
pub struct CorpusBuilder {
    corpus: Corpus,
    lines: Vec<usize>,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates one record. `line` is only used for error messages.
    pub fn push(&mut self, line: usize, raw: RawDocument) -> Result<()> {
        let invalid = |message: String| Error::Validation { line, message };
        let n = raw.tokens.len();
        for m in &raw.mentions {
            if m.start > m.end {
                return Err(invalid(format!("mention of {:?} has start {} > end {}", m.entity, m.start, m.end)));
            }
            if m.end >= n {
                return Err(invalid(format!(
                    "mention of {:?} span [{}, {}] out of range for {} tokens",
                    m.entity, m.start, m.end, n
                )));
            }
        }
        for t in &raw.triplets {
            if t.head == t.tail {
                return Err(invalid(format!("self-loop triplet ({}, {}, {})", t.head, t.relation, t.tail)));
            }
        }

        let doc_index = self.corpus.documents.len();
        let mentions = raw
            .mentions
            .iter()
            .map(|m| Mention { entity: EntityId(self.corpus.entities.intern(&m.entity)), start: m.start, end: m.end })
            .collect();
        let triplets = raw
            .triplets
            .iter()
            .map(|t| Triplet {
                head: EntityId(self.corpus.entities.intern(&t.head)),
                relation: RelationId(self.corpus.relations.intern(&t.relation)),
                tail: EntityId(self.corpus.entities.intern(&t.tail)),
                doc: doc_index,
            })
            .collect();
        self.corpus.documents.push(Document { id: raw.id, tokens: raw.tokens, mentions, triplets });
        self.lines.push(line);
        Ok(())
    }

    /// Checks that every triplet endpoint is mentioned somewhere in the corpus.
    pub fn finish(self) -> Result<Corpus> {
        let mentioned: BTreeSet<EntityId> =
            self.corpus.documents.iter().flat_map(|d| d.mentions.iter().map(|m| m.entity)).collect();
        for (doc, &line) in self.corpus.documents.iter().zip(&self.lines) {
            for t in &doc.triplets {
                for e in [t.head, t.tail] {
                    if !mentioned.contains(&e) {
                        let name = self.corpus.entities.name(e.0).unwrap_or("?");
                        return Err(Error::Validation {
                            line,
                            message: format!("triplet references entity {name:?} with no mention"),
                        });
                    }
                }
            }
        }
        Ok(self.corpus)
    }
}

/// A window of consecutive tokens over the concatenated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub seq_id: usize,
    /// Global token range `[start, end)`.
    pub start: usize,
    pub end: usize,
    pub doc_ids: Vec<usize>,
    /// Deduplicated on `(head, relation, tail)`; first occurrence kept.
    pub triplets: Vec<Triplet>,
    /// Entities with at least one mention fully inside the window, sorted.
    pub entities: Vec<EntityId>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn facts(&self) -> Vec<Fact> {
        self.triplets.iter().map(Triplet::fact).collect()
    }
}

pub const DEFAULT_SEQ_LEN: usize = 512;

/// Splits the concatenation of all documents into windows of `seq_len` tokens.
///
/// A triplet from a covered document attaches to a window iff both its head
/// and tail have a mention lying entirely inside that window, so triplets
/// whose mentions straddle a boundary are dropped.
pub fn chunk_sequences(corpus: &Corpus, seq_len: usize) -> Result<Vec<Sequence>> {
    if seq_len == 0 {
        return Err(Error::Precondition("seq_len must be >= 1".into()));
    }
    let mut offsets = Vec::with_capacity(corpus.documents.len());
    let mut total = 0usize;
    for d in &corpus.documents {
        offsets.push(total);
        total += d.tokens.len();
    }

    let mut out = Vec::new();
    let mut first_doc = 0usize;
    let mut start = 0usize;
    while start < total {
        let end = (start + seq_len).min(total);
        while first_doc < corpus.documents.len() && offsets[first_doc] + corpus.documents[first_doc].tokens.len() <= start {
            first_doc += 1;
        }
        let mut doc_ids = Vec::new();
        let mut inside: BTreeSet<EntityId> = BTreeSet::new();
        let mut di = first_doc;
        while di < corpus.documents.len() && offsets[di] < end {
            let doc = &corpus.documents[di];
            if !doc.tokens.is_empty() && offsets[di] + doc.tokens.len() > start {
                doc_ids.push(di);
                for m in &doc.mentions {
                    let (s, e) = (offsets[di] + m.start, offsets[di] + m.end);
                    if s >= start && e < end {
                        inside.insert(m.entity);
                    }
                }
            }
            di += 1;
        }
        let mut seen = BTreeSet::new();
        let triplets = doc_ids
            .iter()
            .flat_map(|&di| corpus.documents[di].triplets.iter())
            .filter(|t| inside.contains(&t.head) && inside.contains(&t.tail))
            .filter(|t| seen.insert(t.fact()))
            .copied()
            .collect();
        out.push(Sequence { seq_id: out.len(), start, end, doc_ids, triplets, entities: inside.into_iter().collect() });
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn mention(e: &str, s: usize, t: usize) -> RawMention {
        RawMention { entity: e.into(), start: s, end: t }
    }

    fn trip(h: &str, r: &str, t: &str) -> RawTriplet {
        RawTriplet { head: h.into(), relation: r.into(), tail: t.into() }
    }

    fn goalpara() -> RawDocument {
        RawDocument {
            id: "d1".into(),
            tokens: toks(&["Goalpara", "is", "in", "Assam"]),
            mentions: vec![mention("E1", 0, 0), mention("E2", 3, 3)],
            triplets: vec![trip("E1", "located_in", "E2")],
        }
    }

    #[test]
    fn empty_builder_gives_empty_corpus() {
        let c = CorpusBuilder::new().finish().unwrap();
        assert_eq!(c.documents.len(), 0);
        assert_eq!(c.entities.len(), 0);
        assert!(chunk_sequences(&c, 8).unwrap().is_empty());
    }

    #[test]
    fn single_document_fixture_reads_back() {
        let mut b = CorpusBuilder::new();
        b.push(1, goalpara()).unwrap();
        let c = b.finish().unwrap();
        assert_eq!(c.entities.len(), 2);
        assert_eq!(c.relations.len(), 1);
        assert_eq!(c.triplet_count(), 1);
        let t = c.documents[0].triplets[0];
        assert_eq!(c.entities.name(t.head.0), Some("E1"));
        assert_eq!(c.relations.name(t.relation.0), Some("located_in"));
        assert_eq!(c.entities.name(t.tail.0), Some("E2"));
        assert_eq!(c.documents[0].mentions[1], Mention { entity: EntityId(1), start: 3, end: 3 });
    }

    #[test]
    fn out_of_range_mention_names_line() {
        let mut raw = goalpara();
        raw.mentions[1].end = 7;
        let err = CorpusBuilder::new().push(5, raw).unwrap_err();
        assert!(matches!(err, Error::Validation { line: 5, .. }), "{err:?}");
    }

    #[test]
    fn reversed_span_and_self_loop_rejected() {
        let mut raw = goalpara();
        raw.mentions[0] = mention("E1", 2, 1);
        assert!(CorpusBuilder::new().push(1, raw).is_err());
        let mut raw = goalpara();
        raw.triplets.push(trip("E1", "r", "E1"));
        assert!(CorpusBuilder::new().push(1, raw).is_err());
    }

    #[test]
    fn unmentioned_entity_rejected_at_finish() {
        let mut raw = goalpara();
        raw.triplets.push(trip("E1", "r", "E9"));
        let mut b = CorpusBuilder::new();
        b.push(3, raw).unwrap();
        assert!(matches!(b.finish(), Err(Error::Validation { line: 3, .. })));
    }

    #[test]
    fn seq_len_zero_is_precondition_error() {
        let c = Corpus::default();
        assert!(matches!(chunk_sequences(&c, 0), Err(Error::Precondition(_))));
    }

    fn six_token_doc(id: &str, a: &str, b: &str) -> RawDocument {
        RawDocument {
            id: id.into(),
            tokens: toks(&["t0", "t1", "t2", "t3", "t4", "t5"]),
            mentions: vec![mention(a, 0, 0), mention(b, 5, 5)],
            triplets: vec![trip(a, "r", b)],
        }
    }

    #[test]
    fn single_window_covers_everything() {
        let mut b = CorpusBuilder::new();
        b.push(1, six_token_doc("d1", "A", "B")).unwrap();
        let mut raw = goalpara();
        raw.id = "d2".into();
        b.push(2, raw).unwrap();
        let c = b.finish().unwrap();
        assert_eq!(c.token_count(), 10);
        let seqs = chunk_sequences(&c, 10).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].doc_ids, vec![0, 1]);
        assert_eq!(seqs[0].triplets.len(), 2);
    }

    #[test]
    fn two_six_token_docs_in_windows_of_eight() {
        let mut b = CorpusBuilder::new();
        b.push(1, six_token_doc("d1", "A", "B")).unwrap();
        b.push(2, six_token_doc("d2", "C", "D")).unwrap();
        let c = b.finish().unwrap();
        let seqs = chunk_sequences(&c, 8).unwrap();
        // windows [0,8) and [8,12)
        assert_eq!(seqs.len(), 2);
        assert_eq!((seqs[0].start, seqs[0].end), (0, 8));
        assert_eq!((seqs[1].start, seqs[1].end), (8, 12));
        assert_eq!(seqs[0].doc_ids, vec![0, 1]);
        assert_eq!(seqs[1].doc_ids, vec![1]);
        // d1's triplet fits in window 0; d2's straddles (C at 6, D at 11) and is dropped
        assert_eq!(seqs[0].triplets.len(), 1);
        assert_eq!(seqs[0].triplets[0].doc, 0);
        assert!(seqs[1].triplets.is_empty());
    }

    #[test]
    fn cross_document_triplet_attaches_via_other_document_mention() {
        // d2 mentions A too, so d2's (A, r, C) can attach in a window that holds
        // d2 only.
        let mut b = CorpusBuilder::new();
        b.push(1, six_token_doc("d1", "A", "B")).unwrap();
        b.push(
            2,
            RawDocument {
                id: "d2".into(),
                tokens: toks(&["x", "y"]),
                mentions: vec![mention("C", 1, 1)],
                triplets: vec![trip("A", "r", "C")],
            },
        )
        .unwrap();
        let c = b.finish().unwrap();
        let seqs = chunk_sequences(&c, 8).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].triplets.len(), 2);
        let seqs = chunk_sequences(&c, 6).unwrap();
        assert_eq!(seqs[1].doc_ids, vec![1]);
        assert!(seqs[1].triplets.is_empty());
    }

    #[test]
    fn interning_is_deterministic() {
        let build = || {
            let mut b = CorpusBuilder::new();
            b.push(1, six_token_doc("d1", "A", "B")).unwrap();
            b.push(2, six_token_doc("d2", "B", "C")).unwrap();
            b.finish().unwrap()
        };
        assert_eq!(build(), build());
        assert_eq!(build().entities.names(), &["A", "B", "C"]);
    }
}
