//! Learnable parameters and contextual-vector initialization.
//!
//! Relation rows come in pairs: forward rows `0..R` and inverse rows `R..2R`.
//! Offsets are either one vector shared by every relation (and inverse) or
//! one row per relation direction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::boxalg::IntersectionNet;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ids::{EntityId, RelationId, Vocab};
use crate::linalg::{Linear, Matrix};
use crate::query::Direction;
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetMode {
    #[default]
    Shared,
    PerRelation,
}

pub const INIT_OFFSET: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub dim: usize,
    pub entities: Vocab,
    pub relations: Vocab,
    pub entity_centers: Matrix,
    pub relation_centers: Matrix,
    pub offset_mode: OffsetMode,
    pub relation_offsets: Matrix,
    pub net: IntersectionNet,
}

impl ParamStore {
    /// Centers ~ U(-0.5/sqrt(d), 0.5/sqrt(d)), inverse centers the negated
    /// forward centers, offsets 0.1, MLP weights and biases
    /// ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn init_random(dim: usize, entities: Vocab, relations: Vocab, mode: OffsetMode, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Precondition("embedding dimension must be >= 1".into()));
        }
        let mut rng = stream(seed, Stream::Init);
        let scale = 0.5 / libm::sqrt(dim as f64);
        let n_e = entities.len();
        let n_r = relations.len();
        let entity_centers = Matrix::from_fn(n_e, dim, |_, _| rng.random_range(-scale..scale));
        let mut relation_centers = Matrix::zeros(2 * n_r, dim);
        for r in 0..n_r {
            for k in 0..dim {
                let v = rng.random_range(-scale..scale);
                relation_centers.row_mut(r)[k] = v;
                relation_centers.row_mut(n_r + r)[k] = -v;
            }
        }
        let offset_rows = match mode {
            OffsetMode::Shared => 1,
            OffsetMode::PerRelation => 2 * n_r,
        };
        let relation_offsets = Matrix::from_fn(offset_rows, dim, |_, _| INIT_OFFSET);
        let mut net = IntersectionNet::zeros(dim);
        for layer in [
            &mut net.attention.first,
            &mut net.attention.second,
            &mut net.inner.first,
            &mut net.inner.second,
            &mut net.outer.first,
            &mut net.outer.second,
        ] {
            fan_in_uniform(layer, &mut rng);
        }
        Ok(ParamStore { dim, entities, relations, entity_centers, relation_centers, offset_mode: mode, relation_offsets, net })
    }

    pub fn n_entities(&self) -> usize {
        self.entity_centers.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_centers.rows() / 2
    }

    pub fn check_entity(&self, e: EntityId) -> Result<()> {
        if e.index() < self.n_entities() {
            Ok(())
        } else {
            Err(Error::MissingId { kind: "entity", id: e.index() })
        }
    }

    pub fn check_relation(&self, r: RelationId) -> Result<()> {
        if r.index() < self.n_relations() {
            Ok(())
        } else {
            Err(Error::MissingId { kind: "relation", id: r.index() })
        }
    }

    pub fn entity_center(&self, e: EntityId) -> &[f64] {
        self.entity_centers.row(e.index())
    }

    pub fn relation_row(&self, r: RelationId, dir: Direction) -> usize {
        match dir {
            Direction::Forward => r.index(),
            Direction::Inverse => self.n_relations() + r.index(),
        }
    }

    pub fn offset_row(&self, r: RelationId, dir: Direction) -> usize {
        match self.offset_mode {
            OffsetMode::Shared => 0,
            OffsetMode::PerRelation => self.relation_row(r, dir),
        }
    }

    pub fn relation_center(&self, r: RelationId, dir: Direction) -> &[f64] {
        self.relation_centers.row(self.relation_row(r, dir))
    }

    pub fn relation_offset(&self, r: RelationId, dir: Direction) -> &[f64] {
        self.relation_offsets.row(self.offset_row(r, dir))
    }

    pub fn clamp_offsets(&mut self) {
        for o in self.relation_offsets.as_mut_slice() {
            if *o < 0.0 {
                *o = 0.0;
            }
        }
    }

    /// Shape consistency, finiteness and offset nonnegativity.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        let expect = |what: &str, got: usize, want: usize| -> Result<()> {
            if got == want {
                Ok(())
            } else {
                Err(Error::Precondition(format!("{what}: expected {want}, found {got}")))
            }
        };
        expect("entity rows", self.entity_centers.rows(), self.entities.len())?;
        expect("relation rows", self.relation_centers.rows(), 2 * self.relations.len())?;
        expect("entity width", self.entity_centers.cols(), d)?;
        expect("relation width", self.relation_centers.cols(), d)?;
        expect("offset width", self.relation_offsets.cols(), d)?;
        let offset_rows = match self.offset_mode {
            OffsetMode::Shared => 1,
            OffsetMode::PerRelation => 2 * self.relations.len(),
        };
        expect("offset rows", self.relation_offsets.rows(), offset_rows)?;
        expect("intersection width", self.net.dim(), d)?;
        if self.relation_offsets.as_slice().iter().any(|&o| !(o >= 0.0)) {
            return Err(Error::Precondition("relation offsets must be >= 0".into()));
        }
        let all_finite = self
            .entity_centers
            .as_slice()
            .iter()
            .chain(self.relation_centers.as_slice())
            .chain(self.relation_offsets.as_slice())
            .chain(self.net.params())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Precondition("non-finite parameter".into()));
        }
        Ok(())
    }
}

fn fan_in_uniform(layer: &mut Linear, rng: &mut crate::rng::Rng) {
    let bound = 1.0 / libm::sqrt(layer.input_dim() as f64);
    for p in layer.params_mut() {
        *p = rng.random_range(-bound..bound);
    }
}

/// Token vectors of one document, plus optional relation surface spans.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVectors {
    pub rows: Matrix,
    /// Relation name -> inclusive token span in `rows`.
    pub relation_spans: BTreeMap<String, (usize, usize)>,
}

/// Contextual token vectors keyed by document id.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualVectors {
    dim: usize,
    docs: BTreeMap<String, DocVectors>,
}

impl ContextualVectors {
    pub fn new(dim: usize) -> Self {
        ContextualVectors { dim, docs: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, id: String, doc: DocVectors) -> Result<()> {
        if doc.rows.cols() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, actual: doc.rows.cols() });
        }
        self.docs.insert(id, doc);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&DocVectors> {
        self.docs.get(id)
    }

    pub fn docs(&self) -> impl Iterator<Item = (&String, &DocVectors)> {
        self.docs.iter()
    }
}

/// An inclusive token span inside one document's vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanRef<'a> {
    pub doc: &'a str,
    pub start: usize,
    pub end: usize,
}

/// `(h_start + h_end) / 2`.
pub fn span_vector(vectors: &ContextualVectors, span: SpanRef<'_>) -> Result<Vec<f64>> {
    let doc = vectors.get(span.doc).ok_or_else(|| Error::Precondition(format!("no vectors for document {:?}", span.doc)))?;
    if span.start > span.end || span.end >= doc.rows.rows() {
        return Err(Error::Precondition(format!(
            "span [{}, {}] outside {} rows of document {:?}",
            span.start,
            span.end,
            doc.rows.rows(),
            span.doc
        )));
    }
    let (a, b) = (doc.rows.row(span.start), doc.rows.row(span.end));
    Ok(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
}

/// Average of the per-mention start/end means over every mention given.
pub fn entity_center_from_context(vectors: &ContextualVectors, mentions: &[SpanRef<'_>]) -> Result<Vec<f64>> {
    if mentions.is_empty() {
        return Err(Error::Precondition("entity has no mentions".into()));
    }
    let mut acc = vec![0.0; vectors.dim()];
    for m in mentions {
        for (a, v) in acc.iter_mut().zip(span_vector(vectors, *m)?) {
            *a += v;
        }
    }
    let n = mentions.len() as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

/// Start/end mean of the relation's surface span.
pub fn relation_center_from_context(vectors: &ContextualVectors, span: SpanRef<'_>) -> Result<Vec<f64>> {
    span_vector(vectors, span)
}

/// Overwrites entity centers and forward relation centers from contextual
/// vectors; inverse centers become the negated forward centers. Offsets and
/// intersection weights are left untouched.
///
/// A relation with spans in several documents gets the mean of its per-span
/// vectors. Any entity or relation without coverage is reported.
pub fn import_contextual(corpus: &Corpus, vectors: &ContextualVectors, store: &ParamStore) -> Result<ParamStore> {
    if vectors.dim() != store.dim {
        return Err(Error::DimMismatch { expected: store.dim, actual: vectors.dim() });
    }
    for doc in &corpus.documents {
        if let Some(v) = vectors.get(&doc.id) {
            if v.rows.rows() != doc.tokens.len() {
                return Err(Error::Precondition(format!(
                    "document {:?} has {} tokens but {} vector rows",
                    doc.id,
                    doc.tokens.len(),
                    v.rows.rows()
                )));
            }
        }
    }

    let mut out = store.clone();
    let mut missing = Vec::new();

    let mut mentions: BTreeMap<&str, Vec<SpanRef<'_>>> = BTreeMap::new();
    for doc in &corpus.documents {
        if vectors.get(&doc.id).is_none() {
            continue;
        }
        for m in &doc.mentions {
            let name = corpus.entities.name(m.entity.0).unwrap_or_default();
            mentions.entry(name).or_default().push(SpanRef { doc: &doc.id, start: m.start, end: m.end });
        }
    }
    for name in corpus.entities.names() {
        let Some(row) = store.entities.get(name) else {
            missing.push(format!("entity:{name}"));
            continue;
        };
        match mentions.get(name.as_str()) {
            Some(spans) => {
                let c = entity_center_from_context(vectors, spans)?;
                out.entity_centers.row_mut(row as usize).copy_from_slice(&c);
            }
            None => missing.push(format!("entity:{name}")),
        }
    }

    let n_r = store.n_relations();
    for name in corpus.relations.names() {
        let Some(row) = store.relations.get(name) else {
            missing.push(format!("relation:{name}"));
            continue;
        };
        let spans: Vec<SpanRef<'_>> = corpus
            .documents
            .iter()
            .filter_map(|doc| {
                let (s, e) = *vectors.get(&doc.id)?.relation_spans.get(name)?;
                Some(SpanRef { doc: &doc.id, start: s, end: e })
            })
            .collect();
        if spans.is_empty() {
            missing.push(format!("relation:{name}"));
            continue;
        }
        let c = entity_center_from_context(vectors, &spans)?;
        let row = row as usize;
        out.relation_centers.row_mut(row).copy_from_slice(&c);
        for (dst, v) in out.relation_centers.row_mut(n_r + row).iter_mut().zip(&c) {
            *dst = -v;
        }
    }

    if !missing.is_empty() {
        return Err(Error::MissingCoverage(missing));
    }
    Ok(out)
}
