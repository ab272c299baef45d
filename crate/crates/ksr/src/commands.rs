//! One function per subcommand. Each reads the effective configuration,
//! writes its artifacts under `paths.out` and prints a short summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use ksr_core::corpus::chunk_sequences;
use ksr_core::evalgen::{evaluate, generate_queries, KnowledgeGraph, MetricsReport};
use ksr_core::ids::{Fact, Vocab};
use ksr_core::params::{import_contextual, ParamStore};
use ksr_core::rng::{stream, Stream};
use ksr_core::structures::{mine_structures, StructureCounts};
use ksr_core::train::{grad_check, grad_check_fixture, train, Callbacks, GradCheckConfig, TraceRecord, TrainingSource};
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, Result};
use crate::formats::{checkpoint, corpus::load_corpus, kg::load_kg, queries, vectors::load_vectors, write_json, write_jsonl};

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const TRACE: &str = "trace.jsonl";
pub const STRUCTURES: &str = "structures.jsonl";
pub const STRUCTURE_COUNTS: &str = "structure_counts.json";
pub const QUERIES: &str = "queries.jsonl";
pub const METRICS: &str = "metrics.json";
pub const GRADCHECK: &str = "gradcheck.json";
pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

/// Largest relative error `gradcheck` accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.paths.out.clone();
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    std::fs::write(dir.join(EFFECTIVE_CONFIG), cfg.to_toml()).map_err(CliError::io(&dir))?;
    Ok(dir)
}

fn print(out: &mut dyn Write, s: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(s).map_err(|e| CliError::Runtime(format!("stdout: {e}")))
}

#[derive(Serialize)]
struct TripletRow<'a> {
    head: &'a str,
    relation: &'a str,
    tail: &'a str,
}

#[derive(Serialize)]
struct StructureRow<'a> {
    seq: usize,
    kind: &'static str,
    triplets: Vec<TripletRow<'a>>,
}

#[derive(Serialize)]
struct CountsRow {
    simple: usize,
    path: usize,
    outward: usize,
    inward: usize,
}

pub fn mine(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(cfg.require(&cfg.paths.corpus, "corpus")?)?;
    let dir = out_dir(cfg)?;
    let sequences = chunk_sequences(&corpus, cfg.model.seq_len)?;
    let mut total = StructureCounts::default();
    let mut rows = Vec::new();
    for seq in &sequences {
        let facts: Vec<Fact> = seq.triplets.iter().map(|t| t.fact()).collect();
        let structures = mine_structures(&facts);
        total.add(StructureCounts::of(&structures));
        for s in structures {
            let triplets = s
                .facts()
                .into_iter()
                .map(|f| TripletRow {
                    head: corpus.entities.name(f.head.0).unwrap_or("?"),
                    relation: corpus.relations.name(f.relation.0).unwrap_or("?"),
                    tail: corpus.entities.name(f.tail.0).unwrap_or("?"),
                })
                .collect();
            rows.push(StructureRow { seq: seq.seq_id, kind: s.kind().name(), triplets });
        }
    }
    write_jsonl(&dir.join(STRUCTURES), rows)?;
    let counts = CountsRow { simple: total.simple, path: total.path, outward: total.outward, inward: total.inward };
    write_json(&dir.join(STRUCTURE_COUNTS), &counts)?;
    print(
        out,
        format_args!(
            "sequences: {}\nsimple: {}\npath: {}\noutward: {}\ninward: {}\n",
            sequences.len(),
            counts.simple,
            counts.path,
            counts.outward,
            counts.inward
        ),
    )
}

fn vocab_from_source(cfg: &RunConfig) -> Result<(Vocab, Vocab)> {
    match cfg.mode {
        Mode::Text => {
            let c = load_corpus(cfg.require(&cfg.paths.corpus, "corpus")?)?;
            Ok((c.entities, c.relations))
        }
        Mode::Kg => {
            let kg = load_kg(cfg.require(&cfg.paths.kg, "kg")?)?;
            Ok((kg.entities, kg.relations))
        }
    }
}

pub fn init_embeddings(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dir = out_dir(cfg)?;
    let store = match (&cfg.paths.vectors, cfg.mode) {
        (Some(vpath), Mode::Text) => {
            let corpus = load_corpus(cfg.require(&cfg.paths.corpus, "corpus")?)?;
            let vectors = load_vectors(vpath)?;
            if vectors.dim() != cfg.model.dim {
                return Err(CliError::Validation(format!(
                    "{}: vectors have dim {} but model.dim is {}",
                    vpath.display(),
                    vectors.dim(),
                    cfg.model.dim
                )));
            }
            let base = ParamStore::init_random(
                cfg.model.dim,
                corpus.entities.clone(),
                corpus.relations.clone(),
                cfg.offset_mode(),
                cfg.seed,
            )?;
            import_contextual(&corpus, &vectors, &base)?
        }
        (Some(_), Mode::Kg) => {
            return Err(CliError::Validation("contextual vectors need a text corpus (mode = \"text\")".into()));
        }
        (None, _) => {
            let (e, r) = vocab_from_source(cfg)?;
            ParamStore::init_random(cfg.model.dim, e, r, cfg.offset_mode(), cfg.seed)?
        }
    };
    let path = dir.join(CHECKPOINT);
    checkpoint::save(&store, &path)?;
    let how = if cfg.paths.vectors.is_some() { "contextual" } else { "random" };
    print(
        out,
        format_args!(
            "{how} init: {} entities, {} relations, dim {}\nwrote {}\n",
            store.n_entities(),
            store.n_relations(),
            store.dim,
            path.display()
        ),
    )
}

fn load_input_checkpoint(cfg: &RunConfig) -> Result<ParamStore> {
    checkpoint::load(cfg.require(&cfg.paths.checkpoint, "checkpoint")?, Some(cfg.model.dim))
}

/// Generates the training queries used in kg mode.
pub fn kg_training_queries(kg: &KnowledgeGraph, cfg: &RunConfig) -> Result<Vec<ksr_core::evalgen::GeneratedQuery>> {
    let mut rng = stream(cfg.seed, Stream::QueryGen);
    let mut all = Vec::new();
    for (t, n) in cfg.train_counts()? {
        let g = generate_queries(kg, t, n, ksr_core::evalgen::Split::Train, &mut rng)?;
        if let Some(w) = g.warning {
            eprintln!("warning: {w}");
        }
        all.extend(g.queries);
    }
    Ok(all)
}

fn check_same_vocab(store: &ParamStore, entities: &Vocab, relations: &Vocab) -> Result<()> {
    if store.entities != *entities || store.relations != *relations {
        return Err(CliError::Validation(
            "checkpoint ids do not match the training data; run init-embeddings on the same inputs".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct TraceRow {
    step: usize,
    loss: f64,
    loss_simple: f64,
    loss_complex: f64,
    lr: f64,
}

pub fn train_cmd(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let store = load_input_checkpoint(cfg)?;
    if store.offset_mode != cfg.offset_mode() {
        return Err(CliError::Validation(format!(
            "checkpoint uses {:?} offsets but the config asks for {:?}",
            store.offset_mode,
            cfg.offset_mode()
        )));
    }
    let tc = cfg.train_config();
    let dir = out_dir(cfg)?;
    let trace_path = dir.join(TRACE);
    let mut trace_file = std::io::BufWriter::new(std::fs::File::create(&trace_path).map_err(CliError::io(&trace_path))?);
    let mut write_err: Option<std::io::Error> = None;
    let every = cfg.train.checkpoint_every;
    let outcome = {
        let on_record = |r: &TraceRecord| {
            let row = TraceRow { step: r.step, loss: r.loss, loss_simple: r.loss_simple, loss_complex: r.loss_complex, lr: r.lr };
            let line = serde_json::to_string(&row).expect("trace row serializes");
            if let Err(e) = writeln!(trace_file, "{line}") {
                write_err.get_or_insert(e);
            }
        };
        let dir2 = dir.clone();
        let on_step = move |step: usize, p: &ParamStore| -> ksr_core::Result<()> {
            if every > 0 && step.is_multiple_of(every) {
                let path = dir2.join(format!("checkpoint-{step}.bin"));
                std::fs::write(&path, checkpoint::encode(p))
                    .map_err(|e| ksr_core::Error::Precondition(format!("{}: {e}", path.display())))?;
            }
            Ok(())
        };
        let callbacks = Callbacks { on_record: Some(Box::new(on_record)), on_step: Some(Box::new(on_step)), auxiliary: None };
        match cfg.mode {
            Mode::Text => {
                let corpus = load_corpus(cfg.require(&cfg.paths.corpus, "corpus")?)?;
                check_same_vocab(&store, &corpus.entities, &corpus.relations)?;
                let sequences = chunk_sequences(&corpus, cfg.model.seq_len)?;
                train(TrainingSource::Text { sequences: &sequences }, store, &tc, callbacks)
            }
            Mode::Kg => {
                let kg = load_kg(cfg.require(&cfg.paths.kg, "kg")?)?;
                check_same_vocab(&store, &kg.entities, &kg.relations)?;
                let queries = kg_training_queries(&kg, cfg)?;
                train(TrainingSource::Kg { queries: &queries }, store, &tc, callbacks)
            }
        }
    };
    let outcome = outcome.map_err(|e| match e {
        ksr_core::Error::NonFiniteLoss { .. } => CliError::Runtime(e.to_string()),
        e => CliError::from(e),
    })?;
    trace_file.flush().map_err(CliError::io(&trace_path))?;
    if let Some(e) = write_err {
        return Err(CliError::Io { path: trace_path, source: e });
    }
    let path = dir.join(CHECKPOINT);
    checkpoint::save(&outcome.params, &path)?;
    if let Some(last) = outcome.trace.last() {
        print(out, format_args!("step {} loss {:.6}\n", last.step, last.loss))?;
    }
    print(out, format_args!("wrote {}\n", path.display()))
}

#[derive(Serialize)]
struct GradCheckRow {
    max_rel_error: f64,
    trials: usize,
    checked: usize,
    skipped: usize,
    dim: usize,
    step: f64,
    per_shape: std::collections::BTreeMap<String, (usize, f64)>,
}

pub fn gradcheck(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dir = out_dir(cfg)?;
    let params = grad_check_fixture(cfg.gradcheck.dim, cfg.seed)?;
    let gc = GradCheckConfig {
        trials: cfg.gradcheck.trials,
        seed: cfg.seed,
        step: cfg.gradcheck.step,
        distance: cfg.train_config().distance,
        ..GradCheckConfig::default()
    };
    let r = grad_check(&params, &gc)?;
    for (shape, s) in &r.per_shape {
        print(
            out,
            format_args!("{shape:<7} trials {:>4}  coords {:>6}  max rel error {:.3e}\n", s.trials, s.checked, s.max_rel_error),
        )?;
    }
    print(
        out,
        format_args!(
            "max relative error {:.3e} over {} coordinates ({} skipped near hinges, {} trials)\n",
            r.max_rel_error, r.checked, r.skipped, r.trials
        ),
    )?;
    let row = GradCheckRow {
        max_rel_error: r.max_rel_error,
        trials: r.trials,
        checked: r.checked,
        skipped: r.skipped,
        dim: cfg.gradcheck.dim,
        step: gc.step,
        per_shape: r.per_shape.iter().map(|(k, v)| (k.clone(), (v.checked, v.max_rel_error))).collect(),
    };
    write_json(&dir.join(GRADCHECK), &row)?;
    if r.max_rel_error > GRADCHECK_TOLERANCE {
        return Err(CliError::Runtime(format!("gradient check failed: {:.3e} exceeds {GRADCHECK_TOLERANCE:e}", r.max_rel_error)));
    }
    Ok(())
}

pub fn gen_queries(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let kg = load_kg(cfg.require(&cfg.paths.kg, "kg")?)?;
    let dir = out_dir(cfg)?;
    let split = cfg.split()?;
    let mut rng = stream(cfg.seed, Stream::QueryGen);
    let mut rows = Vec::new();
    for (t, n) in cfg.eval_counts()? {
        let g = generate_queries(&kg, t, n, split, &mut rng)?;
        if let Some(w) = &g.warning {
            eprintln!("warning: {w}");
        }
        print(out, format_args!("{t}\t{}\n", g.queries.len()))?;
        rows.extend(g.queries.iter().map(|q| queries::to_record(q, &kg.entities, &kg.relations)));
    }
    let path = dir.join(QUERIES);
    write_jsonl(&path, rows)?;
    print(out, format_args!("wrote {}\n", path.display()))
}

#[derive(Serialize)]
pub struct MetricsRow {
    pub scorer: String,
    pub query_type: String,
    #[serde(rename = "H@1")]
    pub h1: f64,
    #[serde(rename = "H@3")]
    pub h3: f64,
    #[serde(rename = "H@10")]
    pub h10: f64,
    #[serde(rename = "MRR")]
    pub mrr: f64,
    pub n_queries: usize,
}

impl From<&MetricsReport> for MetricsRow {
    fn from(r: &MetricsReport) -> Self {
        MetricsRow {
            scorer: r.scorer.name().to_owned(),
            query_type: r.query_type.name().to_owned(),
            h1: r.h1,
            h3: r.h3,
            h10: r.h10,
            mrr: r.mrr,
            n_queries: r.n_queries,
        }
    }
}

pub fn eval(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let store = load_input_checkpoint(cfg)?;
    let qs = queries::load_queries(cfg.require(&cfg.paths.queries, "queries")?, &store.entities, &store.relations)?;
    let scorer = cfg.scorer()?;
    let reports = evaluate(&qs, &store, scorer, &cfg.train_config().distance, cfg.eval.filtered)?;
    let dir = out_dir(cfg)?;
    print(out, format_args!("{:<8}{:<6}{:>8}{:>8}{:>8}{:>8}{:>8}\n", "scorer", "type", "H@1", "H@3", "H@10", "MRR", "n"))?;
    for r in &reports {
        print(
            out,
            format_args!(
                "{:<8}{:<6}{:>8.4}{:>8.4}{:>8.4}{:>8.4}{:>8}\n",
                r.scorer.name(),
                r.query_type.name(),
                r.h1,
                r.h3,
                r.h10,
                r.mrr,
                r.n_queries
            ),
        )?;
    }
    let rows: Vec<MetricsRow> = reports.iter().map(MetricsRow::from).collect();
    write_json(&dir.join(METRICS), &rows)
}

/// Path of a file inside the configured output directory.
pub fn output(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.paths.out).join(name)
}
