//! Run configuration: a TOML file with sections, overridable per key from the
//! command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ksr_core::boxalg::{DistanceConfig, Norm};
use ksr_core::evalgen::{Scorer, Split};
use ksr_core::params::OffsetMode;
use ksr_core::query::QueryType;
use ksr_core::train::{NegativePool, Schedule, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Text,
    Kg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub paths: Paths,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub gradcheck: GradCheckSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vectors: Option<PathBuf>,
    /// Directory holding `train.tsv`, `valid.tsv` and `test.tsv`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kg: Option<PathBuf>,
    /// Input checkpoint for `train` and `eval`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Query dump read by `eval`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { corpus: None, vectors: None, kg: None, checkpoint: None, queries: None, out: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub dim: usize,
    /// `shared` or `per_relation`; unset picks shared for text and
    /// per_relation for kg.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset_mode: Option<OffsetModeName>,
    pub seq_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { dim: 32, offset_mode: None, seq_len: ksr_core::corpus::DEFAULT_SEQ_LEN }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetModeName {
    Shared,
    PerRelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolName {
    SameSequence,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Constant,
    WarmupLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormName {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub gamma: f64,
    pub alpha: f64,
    pub norm: NormName,
    pub lambda1: f64,
    pub lambda2: f64,
    pub negatives: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub schedule: ScheduleName,
    pub warmup: f64,
    /// Unset picks same_sequence for text and global for kg.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_pool: Option<PoolName>,
    pub log_every: usize,
    /// Write `checkpoint-<step>.bin` every this many steps; 0 disables.
    pub checkpoint_every: usize,
    /// Training queries generated per type in kg mode.
    pub queries: BTreeMap<String, usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            gamma: d.gamma,
            alpha: d.distance.alpha,
            norm: NormName::L1,
            lambda1: d.lambda1,
            lambda2: d.lambda2,
            negatives: d.negatives,
            lr: d.lr,
            beta1: d.beta1,
            beta2: d.beta2,
            eps: d.eps,
            steps: d.steps,
            batch_size: d.batch_size,
            schedule: ScheduleName::WarmupLinear,
            warmup: d.warmup,
            negative_pool: None,
            log_every: d.log_every,
            checkpoint_every: 0,
            queries: QueryType::TRAIN.iter().map(|t| (t.name().to_owned(), 1000)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub split: String,
    pub scorer: String,
    pub filtered: bool,
    /// Evaluation queries generated per type.
    pub counts: BTreeMap<String, usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            split: "test".into(),
            scorer: "box".into(),
            filtered: true,
            counts: QueryType::ALL.iter().map(|t| (t.name().to_owned(), 100)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSection {
    pub dim: usize,
    pub trials: usize,
    pub step: f64,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        let d = ksr_core::train::GradCheckConfig::default();
        GradCheckSection { dim: ksr_core::train::gradcheck::MAX_DIM, trials: d.trials, step: d.step }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Text,
            seed: 0,
            paths: Paths::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            gradcheck: GradCheckSection::default(),
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {value}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(value.to_owned()),
    }
}

/// Applies a `section.key=value` override to a raw table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {assignment:?} is not of the form key=value")))?;
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::Usage(format!("empty key in {assignment:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_owned()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::Usage(format!("{p:?} is not a section")))?;
    }
    cur.insert(last.to_owned(), parse_value(value.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (when given) and applies the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(CliError::io(p))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn offset_mode(&self) -> OffsetMode {
        match (self.model.offset_mode, self.mode) {
            (Some(OffsetModeName::Shared), _) | (None, Mode::Text) => OffsetMode::Shared,
            (Some(OffsetModeName::PerRelation), _) | (None, Mode::Kg) => OffsetMode::PerRelation,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let pool = match (t.negative_pool, self.mode) {
            (Some(PoolName::SameSequence), _) | (None, Mode::Text) => NegativePool::SameSequence,
            (Some(PoolName::Global), _) | (None, Mode::Kg) => NegativePool::Global,
        };
        TrainConfig {
            gamma: t.gamma,
            distance: DistanceConfig {
                alpha: t.alpha,
                norm: match t.norm {
                    NormName::L1 => Norm::L1,
                    NormName::L2 => Norm::L2,
                },
            },
            lambda1: t.lambda1,
            lambda2: t.lambda2,
            negatives: t.negatives,
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            steps: t.steps,
            batch_size: t.batch_size,
            seed: self.seed,
            schedule: match t.schedule {
                ScheduleName::Constant => Schedule::Constant,
                ScheduleName::WarmupLinear => Schedule::WarmupLinear,
            },
            warmup: t.warmup,
            offset_mode: self.offset_mode(),
            negative_pool: pool,
            log_every: t.log_every,
        }
    }

    pub fn split(&self) -> Result<Split> {
        Ok(self.eval.split.parse()?)
    }

    pub fn scorer(&self) -> Result<Scorer> {
        Ok(self.eval.scorer.parse()?)
    }

    fn counts(map: &BTreeMap<String, usize>, what: &str) -> Result<Vec<(QueryType, usize)>> {
        let mut out = Vec::new();
        for (name, &n) in map {
            let t: QueryType = name.parse().map_err(|_| CliError::Validation(format!("{what}: unknown query type {name:?}")))?;
            out.push((t, n));
        }
        out.sort();
        Ok(out)
    }

    /// Evaluation query counts in canonical type order.
    pub fn eval_counts(&self) -> Result<Vec<(QueryType, usize)>> {
        Self::counts(&self.eval.counts, "eval.counts")
    }

    pub fn train_counts(&self) -> Result<Vec<(QueryType, usize)>> {
        let c = Self::counts(&self.train.queries, "train.queries")?;
        if let Some((t, _)) = c.iter().find(|(t, _)| !t.is_trainable()) {
            return Err(CliError::Validation(format!("train.queries: {t} is an evaluation-only type")));
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.dim == 0 {
            return Err(CliError::Validation("model.dim must be >= 1".into()));
        }
        if self.model.seq_len == 0 {
            return Err(CliError::Validation("model.seq_len must be >= 1".into()));
        }
        if self.gradcheck.dim == 0 || self.gradcheck.step.is_nan() || self.gradcheck.step <= 0.0 {
            return Err(CliError::Validation("gradcheck.dim and gradcheck.step must be positive".into()));
        }
        self.train_config().validate()?;
        self.split()?;
        self.scorer()?;
        self.eval_counts()?;
        self.train_counts()?;
        Ok(())
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        path.as_deref().ok_or_else(|| CliError::Validation(format!("paths.{key} is required for this command")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_toml_values_and_fall_back_to_strings() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "train.lr=0.5").unwrap();
        apply_override(&mut t, "paths.out = runs/a").unwrap();
        apply_override(&mut t, "seed=3").unwrap();
        assert_eq!(t["train"]["lr"].as_float(), Some(0.5));
        assert_eq!(t["paths"]["out"].as_str(), Some("runs/a"));
        assert_eq!(t["seed"].as_integer(), Some(3));
        assert!(matches!(apply_override(&mut t, "seed"), Err(CliError::Usage(_))));
        assert!(matches!(apply_override(&mut t, "seed.x=1"), Err(CliError::Usage(_))));
    }

    #[test]
    fn mode_picks_offsets_and_negative_pool() {
        let text = RunConfig::load(None, &[]).unwrap();
        assert_eq!(text.offset_mode(), OffsetMode::Shared);
        assert_eq!(text.train_config().negative_pool, NegativePool::SameSequence);
        let kg = RunConfig::load(None, &["mode=\"kg\"".into()]).unwrap();
        assert_eq!(kg.offset_mode(), OffsetMode::PerRelation);
        assert_eq!(kg.train_config().negative_pool, NegativePool::Global);
        let forced = RunConfig::load(None, &["mode=\"kg\"".into(), "model.offset_mode=\"shared\"".into()]).unwrap();
        assert_eq!(forced.offset_mode(), OffsetMode::Shared);
    }

    #[test]
    fn defaults_match_the_training_defaults() {
        let cfg = RunConfig::load(None, &[]).unwrap();
        let tc = cfg.train_config();
        let d = TrainConfig::default();
        assert_eq!((tc.gamma, tc.lambda1, tc.lambda2, tc.lr), (d.gamma, d.lambda1, d.lambda2, d.lr));
        assert_eq!((tc.beta1, tc.beta2, tc.eps, tc.negatives), (d.beta1, d.beta2, d.eps, d.negatives));
        assert_eq!(tc.distance, d.distance);
        assert_eq!(RunConfig::load(None, &[cfg.to_toml().lines().next().unwrap().to_owned()]).unwrap(), cfg);
    }

    #[test]
    fn bad_values_are_validation_errors() {
        for o in ["train.gamma=-1", "eval.scorer=\"nope\"", "gradcheck.step=0", "eval.counts.\"9x\"=3"] {
            assert!(matches!(RunConfig::load(None, &[o.into()]), Err(CliError::Validation(_))), "{o}");
        }
    }
}
