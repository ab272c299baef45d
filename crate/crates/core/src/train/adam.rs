use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::params::ParamStore;

use super::{Gradients, TrainConfig};

/// Adam with lazily updated embedding rows: only rows present in the
/// gradient have their moments and values changed. Bias correction uses the
/// global step count. The intersection network is updated whenever it
/// received a gradient.
#[derive(Debug, Clone)]
pub struct SparseAdam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    entity: (Matrix, Matrix),
    relation: (Matrix, Matrix),
    offset: (Matrix, Matrix),
    net: (Vec<f64>, Vec<f64>),
}

impl SparseAdam {
    pub fn new(params: &ParamStore, cfg: &TrainConfig) -> Self {
        let like = |m: &Matrix| (Matrix::zeros(m.rows(), m.cols()), Matrix::zeros(m.rows(), m.cols()));
        let n = params.net.param_count();
        SparseAdam {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            step: 0,
            entity: like(&params.entity_centers),
            relation: like(&params.relation_centers),
            offset: like(&params.relation_offsets),
            net: (vec![0.0; n], vec![0.0; n]),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update at learning rate `lr`, followed by clamping relation
    /// offsets to be nonnegative.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        let h = Hyper { b1: self.beta1, b2: self.beta2, eps: self.eps, c1, c2, lr };

        for (&r, g) in &grads.entities {
            h.apply(params.entity_centers.row_mut(r), self.entity.0.row_mut(r), self.entity.1.row_mut(r), g);
        }
        for (&r, g) in &grads.relation_centers {
            h.apply(params.relation_centers.row_mut(r), self.relation.0.row_mut(r), self.relation.1.row_mut(r), g);
        }
        for (&r, g) in &grads.relation_offsets {
            h.apply(params.relation_offsets.row_mut(r), self.offset.0.row_mut(r), self.offset.1.row_mut(r), g);
        }
        if let Some(gnet) = grads.net() {
            let g: Vec<f64> = gnet.params().copied().collect();
            let mut p: Vec<f64> = params.net.params().copied().collect();
            h.apply(&mut p, &mut self.net.0, &mut self.net.1, &g);
            for (dst, v) in params.net.params_mut().zip(p) {
                *dst = v;
            }
        }
        params.clamp_offsets();
    }
}

struct Hyper {
    b1: f64,
    b2: f64,
    eps: f64,
    c1: f64,
    c2: f64,
    lr: f64,
}

impl Hyper {
    fn apply(&self, p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]) {
        for i in 0..p.len() {
            m[i] = self.b1 * m[i] + (1.0 - self.b1) * g[i];
            v[i] = self.b2 * v[i] + (1.0 - self.b2) * g[i] * g[i];
            let mhat = m[i] / self.c1;
            let vhat = v[i] / self.c2;
            p[i] -= self.lr * mhat / (libm::sqrt(vhat) + self.eps);
        }
    }
}
