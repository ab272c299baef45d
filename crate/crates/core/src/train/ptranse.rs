use alloc::format;

use crate::error::{Error, Result};
use crate::ids::{EntityId, RelationId};
use crate::params::ParamStore;
use crate::query::{Direction, QueryDag};

/// Path-TransE score `-|| anchor + sum(+/- r_i) - answer ||_1`; inverse hops
/// subtract the forward relation center. Higher is better, 0 is the maximum.
pub fn ptranse_score_path(
    params: &ParamStore,
    anchor: EntityId,
    path: &[(RelationId, Direction)],
    answer: EntityId,
) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Precondition("path needs at least one relation".into()));
    }
    params.check_entity(anchor)?;
    params.check_entity(answer)?;
    let mut v = params.entity_center(anchor).to_vec();
    for &(r, dir) in path {
        params.check_relation(r)?;
        let rc = params.relation_center(r, Direction::Forward);
        let sign = if dir == Direction::Forward { 1.0 } else { -1.0 };
        for (x, y) in v.iter_mut().zip(rc) {
            *x += sign * y;
        }
    }
    Ok(-v.iter().zip(params.entity_center(answer)).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Scores a query DAG; only projection chains are supported.
pub fn ptranse_score(dag: &QueryDag, answer: EntityId, params: &ParamStore) -> Result<f64> {
    let (anchor, path) = dag.as_path().ok_or_else(|| {
        Error::Unsupported(format!("path scorer cannot evaluate a query with {} nodes that is not a chain", dag.nodes().len()))
    })?;
    ptranse_score_path(params, anchor, &path, answer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::Vocab;
    use crate::params::OffsetMode;
    use crate::query::QueryType;

    fn one_d(anchor: f64, rel: f64, answer: f64) -> ParamStore {
        let mut p =
            ParamStore::init_random(1, Vocab::from_names(["a", "b"]), Vocab::from_names(["r"]), OffsetMode::Shared, 0).unwrap();
        p.entity_centers.row_mut(0)[0] = anchor;
        p.entity_centers.row_mut(1)[0] = answer;
        p.relation_centers.row_mut(0)[0] = rel;
        p
    }

    #[test]
    fn exact_translation_scores_zero() {
        let p = one_d(0.5, 1.5, 2.0);
        let s = ptranse_score_path(&p, EntityId(0), &[(RelationId(0), Direction::Forward)], EntityId(1)).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn one_dimensional_arithmetic() {
        let p = one_d(0.0, 2.0, 3.0);
        let q = QueryType::P1.build(&[EntityId(0)], &[RelationId(0)]).unwrap();
        assert_eq!(ptranse_score(&q, EntityId(1), &p).unwrap(), -1.0);
        let inv = ptranse_score_path(&p, EntityId(0), &[(RelationId(0), Direction::Inverse)], EntityId(1)).unwrap();
        assert_eq!(inv, -5.0);
    }

    #[test]
    fn intersection_is_unsupported() {
        let p = one_d(0.0, 2.0, 3.0);
        let q = QueryType::I2.build(&[EntityId(0), EntityId(1)], &[RelationId(0), RelationId(0)]).unwrap();
        assert!(matches!(ptranse_score(&q, EntityId(1), &p), Err(Error::Unsupported(_))));
    }
}
