//! Query execution over a [`ParamStore`].

use alloc::vec;
use alloc::vec::Vec;

use crate::boxalg::{
    distance, entity_box, intersect_backward, intersect_branches, intersect_forward, project, BoxEmbedding, DistanceConfig,
    IntersectCache,
};
use crate::error::Result;
use crate::ids::EntityId;
use crate::params::ParamStore;
use crate::query::{Op, Plan, QueryDag};
use crate::train::Gradients;

/// Evaluates the DAG into one box per disjunct (a single box when the query
/// has no union).
pub fn execute_query(dag: &QueryDag, params: &ParamStore) -> Result<Vec<BoxEmbedding>> {
    dag.disjuncts()?.iter().map(|p| PlanTape::forward(p, params).map(|t| t.output().clone())).collect()
}

/// `min` over disjunct boxes of the entity-to-box distance.
pub fn union_distance(e: &[f64], boxes: &[BoxEmbedding], cfg: &DistanceConfig) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, b) in boxes.iter().enumerate() {
        let d = distance(e, b, cfg).total;
        if d < best.0 {
            best = (d, i);
        }
    }
    best
}

/// Distance of every entity to the query, in entity-id order.
pub fn score_all(boxes: &[BoxEmbedding], params: &ParamStore, cfg: &DistanceConfig) -> Vec<f64> {
    (0..params.n_entities()).map(|e| union_distance(params.entity_center(EntityId(e as u32)), boxes, cfg).0).collect()
}

/// Forward values of one plan, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct PlanTape {
    slots: Vec<BoxEmbedding>,
    caches: Vec<Option<IntersectCache>>,
}

impl PlanTape {
    pub fn forward(plan: &Plan, params: &ParamStore) -> Result<Self> {
        let mut slots: Vec<BoxEmbedding> = Vec::with_capacity(plan.ops.len());
        let mut caches = Vec::with_capacity(plan.ops.len());
        for op in &plan.ops {
            let (b, cache) = match op {
                Op::Anchor(e) => {
                    params.check_entity(*e)?;
                    (entity_box(params.entity_center(*e)), None)
                }
                Op::Project { src, relation, direction } => {
                    params.check_relation(*relation)?;
                    let b = project(
                        &slots[*src],
                        params.relation_center(*relation, *direction),
                        params.relation_offset(*relation, *direction),
                    )?;
                    (b, None)
                }
                Op::Intersect(srcs) => {
                    let inputs: Vec<BoxEmbedding> = srcs.iter().map(|&s| slots[s].clone()).collect();
                    let (b, c) = intersect_forward(&inputs, &params.net)?;
                    (b, Some(c))
                }
            };
            slots.push(b);
            caches.push(cache);
        }
        Ok(PlanTape { slots, caches })
    }

    pub fn output(&self) -> &BoxEmbedding {
        self.slots.last().expect("plan has at least one op")
    }

    /// Propagates the gradient of the output box into `grads`.
    pub fn backward(&self, plan: &Plan, params: &ParamStore, d_center: &[f64], d_offset: &[f64], grads: &mut Gradients) {
        let d = params.dim;
        let n = plan.ops.len();
        let mut slot_grads: Vec<(Vec<f64>, Vec<f64>)> = (0..n).map(|_| (vec![0.0; d], vec![0.0; d])).collect();
        slot_grads[n - 1] = (d_center.to_vec(), d_offset.to_vec());
        for i in (0..n).rev() {
            let (dc, doff) = core::mem::take(&mut slot_grads[i]);
            match &plan.ops[i] {
                Op::Anchor(e) => add(grads.entity_row(e.index()), &dc),
                Op::Project { src, relation, direction } => {
                    add(grads.relation_center_row(params.relation_row(*relation, *direction)), &dc);
                    add(grads.relation_offset_row(params.offset_row(*relation, *direction)), &doff);
                    add(&mut slot_grads[*src].0, &dc);
                    add(&mut slot_grads[*src].1, &doff);
                }
                Op::Intersect(srcs) => {
                    let inputs: Vec<BoxEmbedding> = srcs.iter().map(|&s| self.slots[s].clone()).collect();
                    let cache = self.caches[i].as_ref().expect("intersection cache");
                    let per_input = intersect_backward(&inputs, &self.slots[i], cache, &params.net, &dc, &doff, grads.net_mut());
                    for (&s, (gc, go)) in srcs.iter().zip(per_input) {
                        add(&mut slot_grads[s].0, &gc);
                        add(&mut slot_grads[s].1, &go);
                    }
                }
            }
        }
    }

    /// Branch signature of every intersection in the plan; returns the
    /// smallest distance to a switching point.
    pub fn branches(&self, plan: &Plan, sig: &mut Vec<i8>) -> f64 {
        let mut margin = f64::INFINITY;
        for (op, cache) in plan.ops.iter().zip(&self.caches) {
            if let (Op::Intersect(srcs), Some(c)) = (op, cache) {
                let inputs: Vec<BoxEmbedding> = srcs.iter().map(|&s| self.slots[s].clone()).collect();
                margin = margin.min(intersect_branches(c, &inputs, sig));
            }
        }
        margin
    }
}

fn add(acc: &mut Vec<f64>, v: &[f64]) {
    if acc.is_empty() {
        acc.resize(v.len(), 0.0);
    }
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
