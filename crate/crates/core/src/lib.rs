//! Core of the link-prediction benchmark toolkit.
//!
//! Everything here is pure computation over in-memory data: the relation
//! schema and its inference rules, graph assembly, leakage-free splitting
//! with typed negatives, ranking/classification metrics and the
//! translational baselines. File formats, configuration and process
//! orchestration live in the `kgbench` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod date;
pub mod embed;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod rng;
pub mod schema;
pub mod split;
pub mod triple;
pub mod vocab;

pub use date::Date;
pub use graph::{Graph, GraphStats};
pub use schema::{Inferability, RelationDef, RelationId, RelationSchema, Schema, SchemaError};
pub use triple::{Edge, EdgeOrigin, Polarity, TripleKey, TripleLookup, TripleSet};
pub use vocab::{EntityId, NodeTypeId, Vocabulary};

/// Hash map used throughout the crate. Iteration order is never relied on
/// for anything that reaches an output.
pub(crate) type HashMap<K, V> = hashbrown::HashMap<K, V>;
pub(crate) type HashSet<K> = hashbrown::HashSet<K>;
