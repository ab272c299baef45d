use alloc::vec::Vec;

use rand::Rng as _;

use crate::corpus::Sequence;
use crate::ids::EntityId;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Negatives {
    pub ids: Vec<EntityId>,
    /// Set when the pool was smaller than `k` and ids repeat.
    pub with_replacement: bool,
}

/// Draws `k` entities from `pool` minus anything `exclude` rejects: without
/// replacement when enough candidates exist, otherwise with replacement.
/// `None` when no candidate remains.
pub fn sample_negatives(pool: &[EntityId], exclude: impl Fn(EntityId) -> bool, k: usize, rng: &mut Rng) -> Option<Negatives> {
    let candidates: Vec<EntityId> = pool.iter().copied().filter(|&e| !exclude(e)).collect();
    if candidates.is_empty() {
        return None;
    }
    if candidates.len() >= k {
        let ids = rand::seq::index::sample(rng, candidates.len(), k).into_iter().map(|i| candidates[i]).collect();
        Some(Negatives { ids, with_replacement: false })
    } else {
        let ids = (0..k).map(|_| candidates[rng.random_range(0..candidates.len())]).collect();
        Some(Negatives { ids, with_replacement: true })
    }
}

/// Negatives from the entities mentioned in the same sequence.
pub fn sample_sequence_negatives(seq: &Sequence, answer: EntityId, k: usize, rng: &mut Rng) -> Option<Negatives> {
    sample_negatives(&seq.entities, |e| e == answer, k, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use alloc::collections::BTreeSet;
    use alloc::vec;

    #[test]
    fn singleton_pool_is_forced() {
        let mut rng = stream(0, Stream::Negatives);
        let n = sample_negatives(&[EntityId(0), EntityId(1)], |e| e == EntityId(0), 1, &mut rng).unwrap();
        assert_eq!(n.ids, vec![EntityId(1)]);
        assert!(!n.with_replacement);
    }

    #[test]
    fn empty_pool_signals_skip() {
        let mut rng = stream(0, Stream::Negatives);
        assert!(sample_negatives(&[EntityId(0)], |e| e == EntityId(0), 3, &mut rng).is_none());
        assert!(sample_negatives(&[], |_| false, 3, &mut rng).is_none());
    }

    #[test]
    fn fixed_seed_draw_is_distinct_and_reproducible() {
        let pool: Vec<EntityId> = (0..11).map(EntityId).collect();
        let draw = || {
            let mut rng = stream(42, Stream::Negatives);
            sample_negatives(&pool, |e| e == EntityId(5), 3, &mut rng).unwrap()
        };
        let a = draw();
        assert_eq!(a, draw());
        assert_eq!(a.ids.len(), 3);
        assert!(!a.ids.contains(&EntityId(5)));
        assert_eq!(a.ids.iter().collect::<BTreeSet<_>>().len(), 3);
    }

    #[test]
    fn small_pool_falls_back_to_replacement() {
        let mut rng = stream(1, Stream::Negatives);
        let n = sample_negatives(&[EntityId(0), EntityId(1), EntityId(2)], |e| e == EntityId(0), 5, &mut rng).unwrap();
        assert!(n.with_replacement);
        assert_eq!(n.ids.len(), 5);
        assert!(n.ids.iter().all(|&e| e != EntityId(0)));
    }
}
