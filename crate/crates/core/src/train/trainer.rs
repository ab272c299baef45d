use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::corpus::Sequence;
use crate::error::{Error, Result};
use crate::evalgen::GeneratedQuery;
use crate::ids::EntityId;
use crate::params::ParamStore;
use crate::rng::{stream, Rng, Stream};
use crate::structures::{mine_structures, sample_from_structures, KnowledgeStructure, QueryAnswer};

use super::objective::{backward_with, example_forward};
use super::{sample_negatives, Gradients, NegativePool, SparseAdam, TrainConfig, TrainExample};
use crate::boxalg::distance_backward;

/// Where training pairs come from.
#[derive(Debug, Clone, Copy)]
pub enum TrainingSource<'a> {
    /// Knowledge structures mined from each sequence's triplets.
    Text { sequences: &'a [Sequence] },
    /// Pre-generated queries; one-hop queries count as simple, the rest as complex.
    Kg { queries: &'a [GeneratedQuery] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// 1-based step number.
    pub step: usize,
    pub loss: f64,
    pub loss_simple: f64,
    pub loss_complex: f64,
    pub lr: f64,
}

/// Extra differentiable term added to the objective each step. It must add
/// its gradient (already scaled as it wants) into `grads` and return its loss.
pub trait AuxiliaryLoss {
    fn accumulate(&mut self, step: usize, params: &ParamStore, grads: &mut Gradients) -> Result<f64>;
}

pub type RecordFn<'a> = Box<dyn FnMut(&TraceRecord) + 'a>;
pub type StepFn<'a> = Box<dyn FnMut(usize, &ParamStore) -> Result<()> + 'a>;

#[derive(Default)]
pub struct Callbacks<'a> {
    pub on_record: Option<RecordFn<'a>>,
    /// Called after every optimizer step with the 1-based step number.
    pub on_step: Option<StepFn<'a>>,
    pub auxiliary: Option<Box<dyn AuxiliaryLoss + 'a>>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParamStore,
    pub trace: Vec<TraceRecord>,
}

struct Rngs {
    batches: Rng,
    mining: Rng,
    negatives: Rng,
}

/// One batch entry: a simple example and an optional complex one, each
/// carrying its weight in the objective.
struct Item {
    simple: Option<(TrainExample, f64)>,
    complex: Option<(TrainExample, f64)>,
}

struct TextState<'a> {
    sequences: &'a [Sequence],
    structures: Vec<Vec<KnowledgeStructure>>,
    eligible: Vec<usize>,
}

pub fn train(
    source: TrainingSource<'_>,
    mut params: ParamStore,
    cfg: &TrainConfig,
    mut callbacks: Callbacks<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    params.validate()?;
    let all: Vec<EntityId> = (0..params.n_entities() as u32).map(EntityId).collect();
    let text = match source {
        TrainingSource::Text { sequences } => {
            let structures: Vec<Vec<KnowledgeStructure>> =
                sequences.iter().map(|s| mine_structures(&s.triplets.iter().map(|t| t.fact()).collect::<Vec<_>>())).collect();
            let eligible: Vec<usize> = (0..sequences.len()).filter(|&i| !structures[i].is_empty()).collect();
            if cfg.steps > 0 && eligible.is_empty() {
                return Err(Error::Precondition("no sequence contains a triplet".into()));
            }
            Some(TextState { sequences, structures, eligible })
        }
        TrainingSource::Kg { queries } => {
            if cfg.steps > 0 && queries.iter().all(|q| q.answers_train.is_empty()) {
                return Err(Error::Precondition("no training query has an answer".into()));
            }
            None
        }
    };
    let mut rngs = Rngs {
        batches: stream(cfg.seed, Stream::Batches),
        mining: stream(cfg.seed, Stream::Mining),
        negatives: stream(cfg.seed, Stream::Negatives),
    };
    let mut adam = SparseAdam::new(&params, cfg);
    let mut trace = Vec::new();

    for t in 0..cfg.steps {
        let step = t + 1;
        let mut items = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let item = match (&text, source) {
                (Some(ts), _) => text_item(ts, &all, cfg, &mut rngs)?,
                (None, TrainingSource::Kg { queries }) => kg_item(queries, &all, cfg, &mut rngs),
                (None, TrainingSource::Text { .. }) => unreachable!(),
            };
            if let Some(item) = item {
                items.push(item);
            }
        }

        let mut grads = Gradients::new(params.dim);
        let (mut total, mut simple_sum, mut complex_sum) = (0.0, 0.0, 0.0);
        let (mut n_simple, mut n_complex) = (0usize, 0usize);
        if !items.is_empty() {
            let scale = 1.0 / items.len() as f64;
            for item in &items {
                if let Some((ex, w)) = &item.simple {
                    let tape = example_forward(ex, &params, cfg)?;
                    backward_with(ex, &tape, &params, cfg, scale * w, &mut grads, distance_backward);
                    total += w * tape.loss;
                    simple_sum += tape.loss;
                    n_simple += 1;
                }
                if let Some((ex, w)) = &item.complex {
                    let tape = example_forward(ex, &params, cfg)?;
                    if *w != 0.0 {
                        backward_with(ex, &tape, &params, cfg, scale * w, &mut grads, distance_backward);
                    }
                    total += w * tape.loss;
                    complex_sum += tape.loss;
                    n_complex += 1;
                }
            }
            total *= scale;
        }
        if let Some(aux) = callbacks.auxiliary.as_mut() {
            total += aux.accumulate(step, &params, &mut grads)?;
        }
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        let lr = cfg.lr_at(t);
        adam.step(&mut params, &grads, lr);

        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        let record = TraceRecord {
            step,
            loss: total,
            loss_simple: mean(simple_sum, n_simple),
            loss_complex: mean(complex_sum, n_complex),
            lr,
        };
        let due = (cfg.log_every > 0 && step % cfg.log_every == 0) || step == cfg.steps;
        if due {
            if let Some(f) = callbacks.on_record.as_mut() {
                f(&record);
            }
            trace.push(record);
        }
        if let Some(f) = callbacks.on_step.as_mut() {
            f(step, &params)?;
        }
    }
    Ok(TrainOutcome { params, trace })
}

fn text_item(ts: &TextState<'_>, all: &[EntityId], cfg: &TrainConfig, rngs: &mut Rngs) -> Result<Option<Item>> {
    let i = ts.eligible[rngs.batches.random_range(0..ts.eligible.len())];
    let seq = &ts.sequences[i];
    let Some(pair) = sample_from_structures(&ts.structures[i], &mut rngs.mining)? else {
        return Ok(None);
    };
    let pool: &[EntityId] = match cfg.negative_pool {
        NegativePool::SameSequence => &seq.entities,
        NegativePool::Global => all,
    };
    let mut example = |qa: QueryAnswer| {
        let negs = sample_negatives(pool, |e| e == qa.answer, cfg.negatives, &mut rngs.negatives)?;
        Some(TrainExample { query: qa.dag, answer: qa.answer, negatives: negs.ids })
    };
    let Some(simple) = example(pair.simple) else {
        return Ok(None);
    };
    let complex = pair.complex.and_then(&mut example);
    Ok(Some(Item { simple: Some((simple, cfg.lambda1)), complex: complex.map(|c| (c, cfg.lambda2)) }))
}

fn kg_item(queries: &[GeneratedQuery], all: &[EntityId], cfg: &TrainConfig, rngs: &mut Rngs) -> Option<Item> {
    let q = &queries[rngs.batches.random_range(0..queries.len())];
    if q.answers_train.is_empty() {
        return None;
    }
    let answer = *q.answers_train.iter().nth(rngs.batches.random_range(0..q.answers_train.len()))?;
    let known: &BTreeSet<EntityId> = &q.answers_train;
    let negs = sample_negatives(all, |e| known.contains(&e), cfg.negatives, &mut rngs.negatives)?;
    let ex = TrainExample { query: q.dag.clone(), answer, negatives: negs.ids };
    // every generated query is trained at full weight
    Some(if q.qtype.is_path() && q.qtype.arity().1 == 1 {
        Item { simple: Some((ex, 1.0)), complex: None }
    } else {
        Item { simple: None, complex: Some((ex, 1.0)) }
    })
}
