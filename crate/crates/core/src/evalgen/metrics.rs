use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::boxalg::DistanceConfig;
use crate::error::{Error, Result};
use crate::exec::{execute_query, score_all};
use crate::ids::EntityId;
use crate::params::ParamStore;
use crate::query::QueryType;
use crate::train::ptranse_score;

use super::GeneratedQuery;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    Box,
    PTransE,
}

impl Scorer {
    pub fn name(self) -> &'static str {
        match self {
            Scorer::Box => "box",
            Scorer::PTransE => "ptranse",
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Scorer::Box),
            "ptranse" => Ok(Scorer::PTransE),
            _ => Err(Error::Precondition(format!("unknown scorer {s:?}"))),
        }
    }
}

/// Rank of each `hard` answer given per-entity distances (lower is better).
///
/// `rank = 1 + #{e not filtered, e != a : D(e) < D(a)}
///           + 0.5 * #{e not filtered, e != a : D(e) == D(a)}`.
pub fn ranks_from_distances(distances: &[f64], hard: &[EntityId], filter: &BTreeSet<EntityId>) -> Vec<f64> {
    hard.iter()
        .map(|&a| {
            let da = distances[a.index()];
            let mut better = 0usize;
            let mut tied = 0usize;
            for (e, &d) in distances.iter().enumerate() {
                let id = EntityId(e as u32);
                if id == a || filter.contains(&id) {
                    continue;
                }
                if d < da {
                    better += 1;
                } else if d == da {
                    tied += 1;
                }
            }
            1.0 + better as f64 + 0.5 * tied as f64
        })
        .collect()
}

fn distances(query: &GeneratedQuery, params: &ParamStore, scorer: Scorer, cfg: &DistanceConfig) -> Result<Vec<f64>> {
    match scorer {
        Scorer::Box => Ok(score_all(&execute_query(&query.dag, params)?, params, cfg)),
        Scorer::PTransE => {
            if query.dag.as_path().is_none() {
                return Err(Error::Unsupported(format!("ptranse scorer cannot rank {} queries", query.qtype)));
            }
            (0..params.n_entities()).map(|e| ptranse_score(&query.dag, EntityId(e as u32), params).map(|s| -s)).collect()
        }
    }
}

/// Ranks of the hard answers; `filtered` removes every other known answer
/// from the candidate list.
pub fn rank_answers(
    query: &GeneratedQuery,
    params: &ParamStore,
    scorer: Scorer,
    cfg: &DistanceConfig,
    filtered: bool,
) -> Result<Vec<f64>> {
    let d = distances(query, params, scorer, cfg)?;
    let filter = if filtered { query.answers_full.clone() } else { BTreeSet::new() };
    Ok(ranks_from_distances(&d, &query.hard_answers(), &filter))
}

pub fn hits_at_k(ranks: &[f64], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Precondition("no ranks".into()));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be >= 1".into()));
    }
    Ok(ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / ranks.len() as f64)
}

pub fn mrr(ranks: &[f64]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Precondition("no ranks".into()));
    }
    Ok(ranks.iter().map(|r| 1.0 / r).sum::<f64>() / ranks.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scorer: Scorer,
    pub query_type: QueryType,
    pub h1: f64,
    pub h3: f64,
    pub h10: f64,
    pub mrr: f64,
    pub n_queries: usize,
}

/// Per-type metrics. Each query contributes the mean over its hard answers,
/// and queries are weighted equally within a type.
pub fn evaluate(
    queries: &[GeneratedQuery],
    params: &ParamStore,
    scorer: Scorer,
    cfg: &DistanceConfig,
    filtered: bool,
) -> Result<Vec<MetricsReport>> {
    let mut per_type: BTreeMap<QueryType, Vec<[f64; 4]>> = BTreeMap::new();
    for q in queries {
        let ranks = rank_answers(q, params, scorer, cfg, filtered)?;
        if ranks.is_empty() {
            continue;
        }
        per_type.entry(q.qtype).or_default().push([
            hits_at_k(&ranks, 1)?,
            hits_at_k(&ranks, 3)?,
            hits_at_k(&ranks, 10)?,
            mrr(&ranks)?,
        ]);
    }
    Ok(per_type
        .into_iter()
        .map(|(t, rows)| {
            let n = rows.len() as f64;
            let mean = |i: usize| rows.iter().map(|r| r[i]).sum::<f64>() / n;
            MetricsReport { scorer, query_type: t, h1: mean(0), h3: mean(1), h10: mean(2), mrr: mean(3), n_queries: rows.len() }
        })
        .collect())
}
