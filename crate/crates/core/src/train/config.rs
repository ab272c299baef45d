use crate::boxalg::DistanceConfig;
use crate::error::{Error, Result};
use crate::params::OffsetMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativePool {
    /// Entities mentioned in the same sequence.
    #[default]
    SameSequence,
    /// Every entity in the store.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    Constant,
    /// Linear warmup over the first `warmup` fraction of steps, then linear
    /// decay to zero.
    #[default]
    WarmupLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub distance: DistanceConfig,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Negatives per query.
    pub negatives: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: Schedule,
    pub warmup: f64,
    pub offset_mode: OffsetMode,
    pub negative_pool: NegativePool,
    /// Emit a trace record every this many steps (and at the last step).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 24.0,
            distance: DistanceConfig::default(),
            lambda1: 1.0,
            lambda2: 0.1,
            negatives: 16,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
            steps: 1000,
            batch_size: 1,
            seed: 0,
            schedule: Schedule::WarmupLinear,
            warmup: 0.1,
            offset_mode: OffsetMode::Shared,
            negative_pool: NegativePool::SameSequence,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    /// Defaults for complex-query training on a knowledge graph: per-relation
    /// offsets and negatives drawn from every entity.
    pub fn kg() -> Self {
        TrainConfig { offset_mode: OffsetMode::PerRelation, negative_pool: NegativePool::Global, ..TrainConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Precondition(m.into()));
        if !(self.gamma > 0.0) {
            return bad("gamma must be > 0");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("lr must be finite and >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.warmup) {
            return bad("warmup fraction must lie in [0, 1]");
        }
        if !(self.distance.alpha >= 0.0) {
            return bad("alpha must be >= 0");
        }
        Ok(())
    }

    /// Learning rate used at 0-based step `t`.
    pub fn lr_at(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.lr,
            Schedule::WarmupLinear => {
                let total = self.steps.max(1) as f64;
                let warm = libm::ceil(self.warmup * total);
                let t = t as f64;
                if t < warm {
                    self.lr * (t + 1.0) / warm
                } else if total > warm {
                    self.lr * (total - t) / (total - warm)
                } else {
                    self.lr
                }
            }
        }
    }
}
