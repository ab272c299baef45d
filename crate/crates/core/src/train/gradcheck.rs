//! Finite-difference verification of the analytic gradients.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::boxalg::{distance_backward, DistanceConfig};
use crate::error::{Error, Result};
use crate::ids::{EntityId, RelationId, Vocab};
use crate::params::{OffsetMode, ParamStore};
use crate::query::{DagBuilder, Direction, QueryDag, QueryType};
use crate::rng::{stream, Rng, Stream};

use super::objective::{backward_with, example_forward};
use super::{DistanceBackwardFn, Gradients, TrainConfig, TrainExample};

/// Largest embedding dimension the checker accepts.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub trials: usize,
    pub seed: u64,
    /// Finite-difference step. Smaller steps let roundoff swamp near-zero
    /// network gradients.
    pub step: f64,
    /// Coordinates whose perturbation moves any branch quantity across a
    /// hinge are skipped; trials with a base-point quantity closer than this
    /// to a hinge are redrawn.
    pub hinge_tol: f64,
    pub negatives: usize,
    pub distance: DistanceConfig,
    /// Kernel used for the distance gradient, replaceable for mutation tests.
    pub distance_backward: DistanceBackwardFn,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            trials: 200,
            seed: 0,
            step: 5e-3,
            hinge_tol: 1e-6,
            negatives: 4,
            distance: DistanceConfig::default(),
            distance_backward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShapeReport {
    pub trials: usize,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub trials: usize,
    pub checked: usize,
    pub skipped: usize,
    pub per_shape: BTreeMap<String, ShapeReport>,
}

/// Query shapes cycled through by the checker.
const SHAPES: [&str; 9] = ["1p", "2p", "2i", "2i-inv", "2u", "3p", "ip", "pi", "up"];

/// Small well-conditioned parameters for gradient checks: every value drawn
/// uniformly from `[-1, 1]`, per-relation offsets from `[0.2, 1]`.
pub fn grad_check_fixture(dim: usize, seed: u64) -> Result<ParamStore> {
    let names = |p: &str, n: usize| Vocab::from_names((0..n).map(|i| format!("{p}{i}")));
    let mut p = ParamStore::init_random(dim, names("e", 12), names("r", 4), OffsetMode::PerRelation, seed)?;
    let mut rng = stream(seed, Stream::GradCheck);
    for v in p.entity_centers.as_mut_slice().iter_mut().chain(p.relation_centers.as_mut_slice()) {
        *v = rng.random_range(-1.0..1.0);
    }
    for v in p.relation_offsets.as_mut_slice() {
        *v = rng.random_range(0.2..1.0);
    }
    for v in p.net.params_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    Ok(p)
}

/// Compares analytic gradients with fourth-order central differences on every
/// touched coordinate of random examples. The relative error of a coordinate
/// is `|g_a - g_n| / max(1e-8, |g_a| + |g_n|)`.
pub fn grad_check(params: &ParamStore, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if params.dim > MAX_DIM {
        return Err(Error::Precondition(format!("gradient check needs dim <= {MAX_DIM}, got {}", params.dim)));
    }
    if params.n_entities() < cfg.negatives + 1 || params.n_relations() == 0 {
        return Err(Error::Precondition("gradient check needs more entities than negatives and a relation".into()));
    }
    let mut report = GradCheckReport::default();
    let mut rng = stream(cfg.seed, Stream::GradCheck);
    let mut work = params.clone();
    for trial in 0..cfg.trials {
        let shape = SHAPES[trial % SHAPES.len()];
        // redraw until the base point sits clear of every hinge
        let (ex, tc) = loop {
            let ex = random_example(shape, params, cfg.negatives, &mut rng)?;
            let mut tc = TrainConfig { distance: cfg.distance, ..TrainConfig::default() };
            let tape = example_forward(&ex, params, &tc)?;
            let ds: Vec<f64> = tape.distances().collect();
            // margin near the typical distance keeps every sigmoid in its curved region
            tc.gamma = (ds.iter().sum::<f64>() / ds.len() as f64).max(1e-3);
            let (_, margin) = tape.branches(params, &tc);
            if margin > cfg.hinge_tol {
                break (ex, tc);
            }
        };
        let entry = report.per_shape.entry(String::from(shape)).or_default();
        entry.trials += 1;

        let tape = example_forward(&ex, params, &tc)?;
        let (base_sig, _) = tape.branches(params, &tc);
        let mut grads = Gradients::new(params.dim);
        backward_with(&ex, &tape, params, &tc, 1.0, &mut grads, cfg.distance_backward);

        for c in touched(&ex, params, &grads) {
            let x = c.get(params);
            let mut f = [0.0; 4];
            let mut crossed = false;
            for (slot, k) in [-2.0, -1.0, 1.0, 2.0].into_iter().enumerate() {
                c.set(&mut work, x + k * cfg.step);
                let t = example_forward(&ex, &work, &tc)?;
                crossed |= t.branches(&work, &tc).0 != base_sig;
                f[slot] = t.loss;
            }
            c.set(&mut work, x);
            if crossed {
                report.skipped += 1;
                continue;
            }
            let numeric = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * cfg.step);
            let analytic = grads.get(c);
            let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
            report.checked += 1;
            entry.checked += 1;
            entry.max_rel_error = entry.max_rel_error.max(err);
            report.max_rel_error = report.max_rel_error.max(err);
        }
    }
    report.trials = cfg.trials;
    Ok(report)
}

/// Every coordinate the example reads, including those whose gradient
/// happens to be zero.
fn touched(ex: &TrainExample, params: &ParamStore, grads: &Gradients) -> Vec<super::Coordinate> {
    use super::Coordinate as C;
    let d = params.dim;
    let mut g = Gradients::new(d);
    for e in ex.query.anchors().into_iter().map(|a| a.1).chain(core::iter::once(ex.answer)).chain(ex.negatives.iter().copied()) {
        g.entity_row(e.index());
    }
    for edge in ex.query.edges() {
        g.relation_center_row(params.relation_row(edge.relation, edge.direction));
        g.relation_offset_row(params.offset_row(edge.relation, edge.direction));
    }
    if grads.net().is_some() {
        g.net_mut();
    }
    let mut out: Vec<C> = g.coordinates();
    out.extend(grads.coordinates());
    out.sort();
    out.dedup();
    out
}

fn random_example(shape: &str, params: &ParamStore, k: usize, rng: &mut Rng) -> Result<TrainExample> {
    let n = params.n_entities() as u32;
    let r = params.n_relations() as u32;
    let mut ent = || EntityId(rng.random_range(0..n));
    let anchors: Vec<EntityId> = (0..3).map(|_| ent()).collect();
    let rels: Vec<RelationId> = (0..3).map(|_| RelationId(rng.random_range(0..r))).collect();
    let query: QueryDag = match shape {
        "2i-inv" => {
            let mut b = DagBuilder::new();
            let x = b.anchor(anchors[0]);
            let y = b.anchor(anchors[1]);
            let px = b.project(x, rels[0], Direction::Inverse);
            let py = b.project(y, rels[1], Direction::Inverse);
            let i = b.intersect(&[px, py]);
            b.finish(i)?
        }
        other => {
            let t: QueryType = other.parse()?;
            let (na, nr) = t.arity();
            t.build(&anchors[..na], &rels[..nr])?
        }
    };
    let answer = EntityId(rng.random_range(0..n));
    let pool: Vec<u32> = (0..n).filter(|&e| e != answer.0).collect();
    let negatives = rand::seq::index::sample(rng, pool.len(), k).into_iter().map(|i| EntityId(pool[i])).collect();
    Ok(TrainExample { query, answer, negatives })
}
