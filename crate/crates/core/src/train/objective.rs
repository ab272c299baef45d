//! Query-answer margin loss, the weighted simple/complex objective and their
//! analytic gradients.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::boxalg::{distance, distance_backward, distance_branches, BoxEmbedding, DistanceConfig, IntersectionNet};
use crate::error::Result;
use crate::exec::{union_distance, PlanTape};
use crate::ids::EntityId;
use crate::linalg::{add_assign, log_sigmoid, sigmoid};
use crate::params::ParamStore;
use crate::query::{Plan, QueryDag};

use super::TrainConfig;

/// A query with its positive answer and sampled negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub query: QueryDag,
    pub answer: EntityId,
    pub negatives: Vec<EntityId>,
}

/// `-log sigmoid(gamma - D(a)) - (1/K) sum_k log sigmoid(D(a'_k) - gamma)`.
pub fn qa_loss_from_distances(answer: f64, negatives: &[f64], gamma: f64) -> f64 {
    let k = negatives.len() as f64;
    let neg: f64 = negatives.iter().map(|&d| log_sigmoid(d - gamma)).sum();
    -log_sigmoid(gamma - answer) - neg / k
}

/// Margin loss against disjunct boxes, with `D(e)` the minimum distance over
/// disjuncts.
pub fn qa_loss(boxes: &[BoxEmbedding], answer: &[f64], negatives: &[&[f64]], cfg: &TrainConfig) -> f64 {
    let d = |e: &[f64]| union_distance(e, boxes, &cfg.distance).0;
    let negs: Vec<f64> = negatives.iter().map(|e| d(e)).collect();
    qa_loss_from_distances(d(answer), &negs, cfg.gamma)
}

/// Sparse gradient buffers shaped like a [`ParamStore`]. Rows never touched
/// by a query stay absent (and read as zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    dim: usize,
    pub entities: BTreeMap<usize, Vec<f64>>,
    pub relation_centers: BTreeMap<usize, Vec<f64>>,
    pub relation_offsets: BTreeMap<usize, Vec<f64>>,
    net: Option<IntersectionNet>,
}

impl Gradients {
    pub fn new(dim: usize) -> Self {
        Gradients {
            dim,
            entities: BTreeMap::new(),
            relation_centers: BTreeMap::new(),
            relation_offsets: BTreeMap::new(),
            net: None,
        }
    }

    pub fn entity_row(&mut self, i: usize) -> &mut Vec<f64> {
        let d = self.dim;
        self.entities.entry(i).or_insert_with(|| vec![0.0; d])
    }

    pub fn relation_center_row(&mut self, i: usize) -> &mut Vec<f64> {
        let d = self.dim;
        self.relation_centers.entry(i).or_insert_with(|| vec![0.0; d])
    }

    pub fn relation_offset_row(&mut self, i: usize) -> &mut Vec<f64> {
        let d = self.dim;
        self.relation_offsets.entry(i).or_insert_with(|| vec![0.0; d])
    }

    pub fn net_mut(&mut self) -> &mut IntersectionNet {
        let d = self.dim;
        self.net.get_or_insert_with(|| IntersectionNet::zeros(d))
    }

    /// `None` when no intersection was evaluated.
    pub fn net(&self) -> Option<&IntersectionNet> {
        self.net.as_ref()
    }

    pub fn scale(&mut self, s: f64) {
        for row in self.entities.values_mut().chain(self.relation_centers.values_mut()).chain(self.relation_offsets.values_mut())
        {
            row.iter_mut().for_each(|v| *v *= s);
        }
        if let Some(net) = &mut self.net {
            net.params_mut().for_each(|v| *v *= s);
        }
    }

    /// Every coordinate with a stored gradient, in a fixed order.
    pub fn coordinates(&self) -> Vec<Coordinate> {
        let mut out = Vec::new();
        for (&r, row) in &self.entities {
            out.extend((0..row.len()).map(|k| Coordinate::Entity(r, k)));
        }
        for (&r, row) in &self.relation_centers {
            out.extend((0..row.len()).map(|k| Coordinate::RelationCenter(r, k)));
        }
        for (&r, row) in &self.relation_offsets {
            out.extend((0..row.len()).map(|k| Coordinate::RelationOffset(r, k)));
        }
        if let Some(net) = &self.net {
            out.extend((0..net.param_count()).map(Coordinate::Net));
        }
        out
    }

    pub fn get(&self, c: Coordinate) -> f64 {
        let row = |m: &BTreeMap<usize, Vec<f64>>, r: usize, k: usize| m.get(&r).map_or(0.0, |v| v[k]);
        match c {
            Coordinate::Entity(r, k) => row(&self.entities, r, k),
            Coordinate::RelationCenter(r, k) => row(&self.relation_centers, r, k),
            Coordinate::RelationOffset(r, k) => row(&self.relation_offsets, r, k),
            Coordinate::Net(i) => self.net.as_ref().and_then(|n| n.params().nth(i).copied()).unwrap_or(0.0),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (&r, v) in &other.entities {
            add_assign(self.entity_row(r), v);
        }
        for (&r, v) in &other.relation_centers {
            add_assign(self.relation_center_row(r), v);
        }
        for (&r, v) in &other.relation_offsets {
            add_assign(self.relation_offset_row(r), v);
        }
        if let Some(n) = &other.net {
            for (a, b) in self.net_mut().params_mut().zip(n.params()) {
                *a += b;
            }
        }
    }
}

/// One scalar parameter of a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Coordinate {
    Entity(usize, usize),
    RelationCenter(usize, usize),
    RelationOffset(usize, usize),
    /// Index into [`IntersectionNet::params`] order.
    Net(usize),
}

impl Coordinate {
    pub fn get(self, p: &ParamStore) -> f64 {
        match self {
            Coordinate::Entity(r, k) => p.entity_centers.row(r)[k],
            Coordinate::RelationCenter(r, k) => p.relation_centers.row(r)[k],
            Coordinate::RelationOffset(r, k) => p.relation_offsets.row(r)[k],
            Coordinate::Net(i) => *p.net.params().nth(i).expect("net index"),
        }
    }

    pub fn set(self, p: &mut ParamStore, v: f64) {
        match self {
            Coordinate::Entity(r, k) => p.entity_centers.row_mut(r)[k] = v,
            Coordinate::RelationCenter(r, k) => p.relation_centers.row_mut(r)[k] = v,
            Coordinate::RelationOffset(r, k) => p.relation_offsets.row_mut(r)[k] = v,
            Coordinate::Net(i) => *p.net.params_mut().nth(i).expect("net index") = v,
        }
    }
}

/// Forward state of one example.
#[derive(Debug, Clone)]
pub struct ExampleTape {
    plans: Vec<Plan>,
    tapes: Vec<PlanTape>,
    /// `(D, minimizing disjunct)` for the answer, then each negative.
    scored: Vec<(EntityId, f64, usize)>,
    pub loss: f64,
}

impl ExampleTape {
    pub fn answer_distance(&self) -> f64 {
        self.scored[0].1
    }

    /// `D` of the answer followed by each negative.
    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.scored.iter().map(|s| s.1)
    }

    /// Discrete branch decisions taken during the forward pass and the
    /// distance of the closest one to switching.
    pub fn branches(&self, params: &ParamStore, cfg: &TrainConfig) -> (Vec<i8>, f64) {
        let mut sig = Vec::new();
        let mut margin = f64::INFINITY;
        for (plan, tape) in self.plans.iter().zip(&self.tapes) {
            margin = margin.min(tape.branches(plan, &mut sig));
        }
        for &(e, best_d, which) in &self.scored {
            sig.push(which as i8);
            let center = params.entity_center(e);
            for (i, t) in self.tapes.iter().enumerate() {
                if i != which {
                    margin = margin.min((distance(center, t.output(), &cfg.distance).total - best_d).abs());
                }
            }
            margin = margin.min(distance_branches(center, self.tapes[which].output(), &cfg.distance, &mut sig));
        }
        (sig, margin)
    }
}

pub fn example_forward(ex: &TrainExample, params: &ParamStore, cfg: &TrainConfig) -> Result<ExampleTape> {
    let plans = ex.query.disjuncts()?;
    let tapes = plans.iter().map(|p| PlanTape::forward(p, params)).collect::<Result<Vec<_>>>()?;
    let boxes: Vec<BoxEmbedding> = tapes.iter().map(|t| t.output().clone()).collect();
    let mut scored = Vec::with_capacity(1 + ex.negatives.len());
    for &e in core::iter::once(&ex.answer).chain(&ex.negatives) {
        params.check_entity(e)?;
        let (d, which) = union_distance(params.entity_center(e), &boxes, &cfg.distance);
        scored.push((e, d, which));
    }
    let negs: Vec<f64> = scored[1..].iter().map(|s| s.1).collect();
    let loss = qa_loss_from_distances(scored[0].1, &negs, cfg.gamma);
    Ok(ExampleTape { plans, tapes, scored, loss })
}

/// Signature of the per-coordinate distance gradient kernel.
pub type DistanceBackwardFn = fn(&[f64], &BoxEmbedding, &DistanceConfig, f64, &mut [f64], &mut [f64], &mut [f64]);

/// Accumulates `scale * dL/d(params)` for one example into `grads`.
pub fn backward_with(
    ex: &TrainExample,
    tape: &ExampleTape,
    params: &ParamStore,
    cfg: &TrainConfig,
    scale: f64,
    grads: &mut Gradients,
    dist_grad: DistanceBackwardFn,
) {
    let d = params.dim;
    let k = ex.negatives.len() as f64;
    let mut box_grads: Vec<(Vec<f64>, Vec<f64>)> = tape.tapes.iter().map(|_| (vec![0.0; d], vec![0.0; d])).collect();
    for (i, &(e, dist, which)) in tape.scored.iter().enumerate() {
        // dL/dD: sigmoid(D - gamma) for the answer, -sigmoid(gamma - D)/K per negative
        let upstream = if i == 0 { sigmoid(dist - cfg.gamma) } else { -sigmoid(cfg.gamma - dist) / k } * scale;
        let mut ge = vec![0.0; d];
        let (gc, go) = &mut box_grads[which];
        dist_grad(params.entity_center(e), tape.tapes[which].output(), &cfg.distance, upstream, &mut ge, gc, go);
        add_assign(grads.entity_row(e.index()), &ge);
    }
    for ((plan, t), (gc, go)) in tape.plans.iter().zip(&tape.tapes).zip(&box_grads) {
        t.backward(plan, params, gc, go, grads);
    }
}

/// Gradient of the margin loss of a single example.
pub fn backward(ex: &TrainExample, params: &ParamStore, cfg: &TrainConfig) -> Result<Gradients> {
    let tape = example_forward(ex, params, cfg)?;
    let mut g = Gradients::new(params.dim);
    backward_with(ex, &tape, params, cfg, 1.0, &mut g, distance_backward);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrLoss {
    pub total: f64,
    pub simple: f64,
    /// Zero when no complex query was available.
    pub complex: f64,
}

/// `lambda1 * L(simple) + lambda2 * L(complex)`.
pub fn sr_loss(simple: &TrainExample, complex: Option<&TrainExample>, params: &ParamStore, cfg: &TrainConfig) -> Result<SrLoss> {
    let s = example_forward(simple, params, cfg)?.loss;
    let c = match complex {
        Some(c) => example_forward(c, params, cfg)?.loss,
        None => 0.0,
    };
    Ok(SrLoss { total: cfg.lambda1 * s + cfg.lambda2 * c, simple: s, complex: c })
}

/// Accumulates `scale * d(sr_loss)/d(params)` and returns the loss.
pub fn sr_backward(
    simple: &TrainExample,
    complex: Option<&TrainExample>,
    params: &ParamStore,
    cfg: &TrainConfig,
    scale: f64,
    grads: &mut Gradients,
) -> Result<SrLoss> {
    sr_backward_with(simple, complex, params, cfg, scale, grads, distance_backward)
}

pub(crate) fn sr_backward_with(
    simple: &TrainExample,
    complex: Option<&TrainExample>,
    params: &ParamStore,
    cfg: &TrainConfig,
    scale: f64,
    grads: &mut Gradients,
    dist_grad: DistanceBackwardFn,
) -> Result<SrLoss> {
    let ts = example_forward(simple, params, cfg)?;
    backward_with(simple, &ts, params, cfg, scale * cfg.lambda1, grads, dist_grad);
    let c = match complex {
        Some(ex) => {
            let tc = example_forward(ex, params, cfg)?;
            if cfg.lambda2 != 0.0 {
                backward_with(ex, &tc, params, cfg, scale * cfg.lambda2, grads, dist_grad);
            }
            tc.loss
        }
        None => 0.0,
    };
    Ok(SrLoss { total: cfg.lambda1 * ts.loss + cfg.lambda2 * c, simple: ts.loss, complex: c })
}
