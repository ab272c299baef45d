//! Complex-query generation over a knowledge graph, a set-semantics answer
//! oracle and filtered ranking metrics.

mod answers;
mod generate;
mod kg;
mod metrics;

pub use answers::{brute_force_answers, EdgeIndex};
pub use generate::{generate_queries, GeneratedQuery, Generation};
pub use kg::{KnowledgeGraph, Split};
pub use metrics::{evaluate, hits_at_k, mrr, rank_answers, ranks_from_distances, MetricsReport, Scorer};
