//! Knowledge-structure reasoning with box embeddings.
//!
//! This crate is the allocation-only algorithmic core: it has no IO and builds
//! under `#![no_std]` with `alloc`. The pieces are
//!
//! - [`corpus`]: the annotated-text data model and fixed-length sequence chunking,
//! - [`structures`]: mining of the four elementary knowledge structures and
//!   their conversion into query DAGs,
//! - [`query`]: the query DAG type shared by text mining and KG query generation,
//! - [`boxalg`]: boxes, relation projection, attention intersection and the
//!   entity-to-box distance, with hand-written backward passes,
//! - [`params`]: the learnable parameter store and contextual-vector initialization,
//! - [`train`]: losses, analytic gradients, sparse Adam, the training loop,
//!   gradient checking and the path-TransE baseline scorer,
//! - [`evalgen`]: complex query generation over a KG, a brute-force answer
//!   oracle and filtered ranking metrics.
//!
//! File formats and the command-line driver live in the `ksr` companion crate.

#![no_std]
// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod boxalg;
pub mod corpus;
pub mod error;
pub mod evalgen;
pub mod exec;
pub mod ids;
pub mod linalg;
pub mod params;
pub mod query;
pub mod rng;
pub mod structures;
pub mod train;

pub use error::{Error, Result};
pub use ids::{EntityId, Fact, RelationId, Vocab};
