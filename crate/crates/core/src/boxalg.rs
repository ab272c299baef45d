//! Box embeddings: representation, relation projection, attention
//! intersection and the entity-to-box distance.
//!
//! A box is a center vector and a nonnegative offset vector; it contains
//! every point `e` with `center - offset <= e <= center + offset`.
//! Forward passes that feed training return caches, and every differentiable
//! op has a matching `*_backward` that accumulates into caller-owned buffers.
//! At non-differentiable points (`max(., 0)` faces, `|0|`, ReLU at 0, ties in
//! a minimum) the zero subgradient, or the first minimizer, is used.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{sigmoid, Mlp, MlpCache};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxEmbedding {
    pub center: Vec<f64>,
    pub offset: Vec<f64>,
}

impl BoxEmbedding {
    pub fn new(center: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if center.len() != offset.len() {
            return Err(Error::DimMismatch { expected: center.len(), actual: offset.len() });
        }
        if offset.iter().any(|&o| !(o >= 0.0)) {
            return Err(Error::Precondition("box offset must be elementwise >= 0".into()));
        }
        Ok(BoxEmbedding { center, offset })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn max_corner(&self) -> Vec<f64> {
        self.center.iter().zip(&self.offset).map(|(c, o)| c + o).collect()
    }

    pub fn min_corner(&self) -> Vec<f64> {
        self.center.iter().zip(&self.offset).map(|(c, o)| c - o).collect()
    }

    /// Closed-box membership.
    pub fn contains(&self, e: &[f64]) -> bool {
        e.iter().zip(self.center.iter().zip(&self.offset)).all(|(&x, (&c, &o))| c - o <= x && x <= c + o)
    }
}

/// An entity as a zero-volume box at its center.
pub fn entity_box(center: &[f64]) -> BoxEmbedding {
    BoxEmbedding { center: center.to_vec(), offset: vec![0.0; center.len()] }
}

/// Relation projection: translate the center and grow the offset.
pub fn project(b: &BoxEmbedding, rel_center: &[f64], rel_offset: &[f64]) -> Result<BoxEmbedding> {
    let d = b.dim();
    for len in [rel_center.len(), rel_offset.len(), b.offset.len()] {
        if len != d {
            return Err(Error::DimMismatch { expected: d, actual: len });
        }
    }
    Ok(BoxEmbedding {
        center: b.center.iter().zip(rel_center).map(|(x, y)| x + y).collect(),
        offset: b.offset.iter().zip(rel_offset).map(|(x, y)| x + y).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceConfig {
    /// Weight of the inside distance.
    pub alpha: f64,
    pub norm: Norm,
}

pub const DEFAULT_ALPHA: f64 = 0.02;

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig { alpha: DEFAULT_ALPHA, norm: Norm::L1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    pub total: f64,
    pub outside: f64,
    pub inside: f64,
}

/// Where one coordinate of an entity falls relative to the box faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Within,
    Above,
}

#[inline]
fn side(x: f64, c: f64, o: f64) -> Side {
    if x > c + o {
        Side::Above
    } else if x < c - o {
        Side::Below
    } else {
        Side::Within
    }
}

/// Per-coordinate outside and inside residuals, before the norm.
#[inline]
fn residuals(x: f64, c: f64, o: f64) -> (f64, f64, Side) {
    let hi = c + o;
    let lo = c - o;
    let out = (x - hi).max(0.0) + (lo - x).max(0.0);
    let clamped = hi.min(lo.max(x));
    (out, c - clamped, side(x, c, o))
}

fn norm_value(norm: Norm, v: &[f64]) -> f64 {
    match norm {
        Norm::L1 => v.iter().map(|x| x.abs()).sum(),
        Norm::L2 => libm::sqrt(v.iter().map(|x| x * x).sum()),
    }
}

/// `d/dv_k` of the norm; zero subgradient at the kink.
fn norm_grad(norm: Norm, v: &[f64], value: f64) -> Vec<f64> {
    match norm {
        Norm::L1 => v.iter().map(|&x| sign(x)).collect(),
        Norm::L2 => {
            if value == 0.0 {
                vec![0.0; v.len()]
            } else {
                v.iter().map(|x| x / value).collect()
            }
        }
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Distance from entity point `e` to box `b`:
/// `outside = ||max(e - b_max, 0) + max(b_min - e, 0)||`,
/// `inside = ||center - min(b_max, max(b_min, e))||`,
/// `total = outside + alpha * inside`.
///
/// Panics if `e` and `b` differ in dimension.
pub fn distance(e: &[f64], b: &BoxEmbedding, cfg: &DistanceConfig) -> Distance {
    assert_eq!(e.len(), b.dim(), "entity and box dimension");
    let mut out = Vec::with_capacity(e.len());
    let mut inn = Vec::with_capacity(e.len());
    for ((&x, &c), &o) in e.iter().zip(&b.center).zip(&b.offset) {
        let (po, pi, _) = residuals(x, c, o);
        out.push(po);
        inn.push(pi);
    }
    let outside = norm_value(cfg.norm, &out);
    let inside = norm_value(cfg.norm, &inn);
    Distance { total: outside + cfg.alpha * inside, outside, inside }
}

/// Accumulates `upstream * d(total)/d(.)` into the entity, center and offset
/// gradient buffers.
pub fn distance_backward(
    e: &[f64],
    b: &BoxEmbedding,
    cfg: &DistanceConfig,
    upstream: f64,
    grad_e: &mut [f64],
    grad_center: &mut [f64],
    grad_offset: &mut [f64],
) {
    let d = e.len();
    let mut out = Vec::with_capacity(d);
    let mut inn = Vec::with_capacity(d);
    let mut sides = Vec::with_capacity(d);
    for ((&x, &c), &o) in e.iter().zip(&b.center).zip(&b.offset) {
        let (po, pi, s) = residuals(x, c, o);
        out.push(po);
        inn.push(pi);
        sides.push(s);
    }
    let g_out = norm_grad(cfg.norm, &out, norm_value(cfg.norm, &out));
    let g_in = norm_grad(cfg.norm, &inn, norm_value(cfg.norm, &inn));
    for k in 0..d {
        let go = upstream * g_out[k];
        let gi = upstream * cfg.alpha * g_in[k];
        match sides[k] {
            Side::Above => {
                // out = x - c - o ; inside residual = -o
                grad_e[k] += go;
                grad_center[k] -= go;
                grad_offset[k] -= go + gi;
            }
            Side::Below => {
                // out = c - o - x ; inside residual = o
                grad_e[k] -= go;
                grad_center[k] += go;
                grad_offset[k] += gi - go;
            }
            Side::Within => {
                // inside residual = c - x
                grad_center[k] += gi;
                grad_e[k] -= gi;
            }
        }
    }
}

/// Discrete branch decisions of [`distance`], and how close `e` is to
/// flipping one of them.
pub fn distance_branches(e: &[f64], b: &BoxEmbedding, cfg: &DistanceConfig, sig: &mut Vec<i8>) -> f64 {
    let mut margin = f64::INFINITY;
    for ((&x, &c), &o) in e.iter().zip(&b.center).zip(&b.offset) {
        let (_, q, s) = residuals(x, c, o);
        sig.push(match s {
            Side::Below => -1,
            Side::Within => 0,
            Side::Above => 1,
        });
        margin = margin.min((x - (c + o)).abs()).min((x - (c - o)).abs());
        if cfg.norm == Norm::L1 {
            sig.push(sign(q) as i8);
            margin = margin.min(q.abs());
        }
    }
    margin
}

/// Weights of the intersection operator: an attention MLP over centers
/// (`d -> d -> d`) and a DeepSets offset network with an inner MLP over
/// `[center; offset]` (`2d -> d -> d`) and an outer MLP (`d -> d -> d`).
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionNet {
    pub attention: Mlp,
    pub inner: Mlp,
    pub outer: Mlp,
}

impl IntersectionNet {
    pub fn zeros(dim: usize) -> Self {
        IntersectionNet {
            attention: Mlp::zeros(dim, dim, dim),
            inner: Mlp::zeros(2 * dim, dim, dim),
            outer: Mlp::zeros(dim, dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.attention.first.input_dim()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.attention.params().chain(self.inner.params()).chain(self.outer.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.attention.params_mut().chain(self.inner.params_mut()).chain(self.outer.params_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().count()
    }
}

#[derive(Debug, Clone)]
pub struct IntersectCache {
    att: Vec<MlpCache>,
    /// Softmax weights, one row per input box.
    weights: Vec<Vec<f64>>,
    inner_in: Vec<Vec<f64>>,
    inner: Vec<MlpCache>,
    pooled: Vec<f64>,
    outer: MlpCache,
    gate: Vec<f64>,
    min_offset: Vec<f64>,
    argmin: Vec<usize>,
}

/// Attention intersection. Center: per-dimension softmax over the boxes of
/// the attention logits, used as convex weights on the centers. Offset:
/// elementwise minimum of the input offsets, shrunk by a sigmoid gate from
/// the DeepSets network.
pub fn intersect(boxes: &[BoxEmbedding], net: &IntersectionNet) -> Result<BoxEmbedding> {
    intersect_forward(boxes, net).map(|(b, _)| b)
}

pub fn intersect_forward(boxes: &[BoxEmbedding], net: &IntersectionNet) -> Result<(BoxEmbedding, IntersectCache)> {
    let first = boxes.first().ok_or_else(|| Error::Precondition("intersection of zero boxes".into()))?;
    let d = first.dim();
    if let Some(b) = boxes.iter().find(|b| b.dim() != d || b.offset.len() != d) {
        return Err(Error::DimMismatch { expected: d, actual: b.dim() });
    }
    if net.dim() != d {
        return Err(Error::DimMismatch { expected: net.dim(), actual: d });
    }
    let n = boxes.len();

    let mut logits = Vec::with_capacity(n);
    let mut att = Vec::with_capacity(n);
    for b in boxes {
        let (z, cache) = net.attention.forward(&b.center);
        logits.push(z);
        att.push(cache);
    }
    let mut weights = vec![vec![0.0; d]; n];
    let mut center = vec![0.0; d];
    for k in 0..d {
        let mx = logits.iter().map(|z| z[k]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for i in 0..n {
            let w = libm::exp(logits[i][k] - mx);
            weights[i][k] = w;
            total += w;
        }
        for i in 0..n {
            weights[i][k] /= total;
            center[k] += weights[i][k] * boxes[i].center[k];
        }
    }

    let mut inner_in = Vec::with_capacity(n);
    let mut inner = Vec::with_capacity(n);
    let mut pooled = vec![0.0; d];
    for b in boxes {
        let mut x = b.center.clone();
        x.extend_from_slice(&b.offset);
        let (h, cache) = net.inner.forward(&x);
        for (p, v) in pooled.iter_mut().zip(&h) {
            *p += v;
        }
        inner_in.push(x);
        inner.push(cache);
    }
    for p in pooled.iter_mut() {
        *p /= n as f64;
    }
    let (u, outer) = net.outer.forward(&pooled);
    let gate: Vec<f64> = u.iter().map(|&v| sigmoid(v)).collect();

    let mut min_offset = vec![0.0; d];
    let mut argmin = vec![0usize; d];
    for k in 0..d {
        let mut best = 0;
        for i in 1..n {
            if boxes[i].offset[k] < boxes[best].offset[k] {
                best = i;
            }
        }
        argmin[k] = best;
        min_offset[k] = boxes[best].offset[k];
    }
    let offset = min_offset.iter().zip(&gate).map(|(m, s)| m * s).collect();
    Ok((
        BoxEmbedding { center, offset },
        IntersectCache { att, weights, inner_in, inner, pooled, outer, gate, min_offset, argmin },
    ))
}

/// Returns `(d center_i, d offset_i)` per input box and accumulates weight
/// gradients into `grad_net`.
pub fn intersect_backward(
    boxes: &[BoxEmbedding],
    out: &BoxEmbedding,
    cache: &IntersectCache,
    net: &IntersectionNet,
    d_center: &[f64],
    d_offset: &[f64],
    grad_net: &mut IntersectionNet,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = boxes.len();
    let d = out.dim();
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = (0..n).map(|_| (vec![0.0; d], vec![0.0; d])).collect();

    // center = sum_i a_i * c_i, a = softmax_i(z_i) per dimension
    for i in 0..n {
        let mut dz = vec![0.0; d];
        for k in 0..d {
            let a = cache.weights[i][k];
            grads[i].0[k] += d_center[k] * a;
            dz[k] = d_center[k] * a * (boxes[i].center[k] - out.center[k]);
        }
        let dc = net.attention.backward(&boxes[i].center, &cache.att[i], &dz, &mut grad_net.attention);
        for (g, v) in grads[i].0.iter_mut().zip(dc) {
            *g += v;
        }
    }

    // offset = min_i(o_i) * sigmoid(outer(mean_i inner([c_i; o_i])))
    let mut du = vec![0.0; d];
    for k in 0..d {
        let s = cache.gate[k];
        grads[cache.argmin[k]].1[k] += d_offset[k] * s;
        du[k] = d_offset[k] * cache.min_offset[k] * s * (1.0 - s);
    }
    let dpooled = net.outer.backward(&cache.pooled, &cache.outer, &du, &mut grad_net.outer);
    let dh: Vec<f64> = dpooled.iter().map(|v| v / n as f64).collect();
    for (i, g) in grads.iter_mut().enumerate() {
        let dx = net.inner.backward(&cache.inner_in[i], &cache.inner[i], &dh, &mut grad_net.inner);
        for k in 0..d {
            g.0[k] += dx[k];
            g.1[k] += dx[d + k];
        }
    }
    grads
}

/// Branch decisions (ReLU activity, minimizing box per dimension) and the
/// distance of the nearest one to its switching point.
pub fn intersect_branches(cache: &IntersectCache, boxes: &[BoxEmbedding], sig: &mut Vec<i8>) -> f64 {
    let mut margin = f64::INFINITY;
    let relus = cache.att.iter().chain(cache.inner.iter()).chain(core::iter::once(&cache.outer));
    for c in relus {
        for &p in &c.hidden_pre {
            sig.push((p > 0.0) as i8);
            margin = margin.min(p.abs());
        }
    }
    for (k, &best) in cache.argmin.iter().enumerate() {
        sig.push(best as i8);
        for (i, b) in boxes.iter().enumerate() {
            if i != best {
                margin = margin.min((b.offset[k] - boxes[best].offset[k]).abs());
            }
        }
    }
    margin
}
