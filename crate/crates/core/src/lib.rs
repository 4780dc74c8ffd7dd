//! In-memory session-graph recommender.
//!
//! * [`graph`]: bipartite kernel → object graph, build-then-freeze.
//! * [`ingest`]: CSV edge/catalog loading and vector/edge export.
//! * [`engine`]: two-hop expansion, in-degree scoring, ranking and the
//!   weighted, three-layer and pathway variants.
//! * [`evaluation`]: action logs, hit-ratio efficiency, random algorithm
//!   assignment, a seeded user simulator and baseline recommenders.
//! * [`batch`] / [`par`]: data-parallel batch recommendation (rayon behind
//!   the `parallel` feature, sequential otherwise).
//! * [`synth`]: synthetic graphs with exact node and edge counts.

pub mod batch;
pub mod engine;
pub mod evaluation;
pub mod fixtures;
pub mod graph;
pub mod ingest;
pub mod par;
pub mod synth;

pub use engine::{
    expand_one, expand_two, rank, recommend, recommend_pathway, recommend_three_layer, score_candidates,
    ClassWeights, DegreeScope, EngineError, Entry, RecommendParams, RecommendationVector, Score, Seed, Variant,
};
pub use graph::{GraphBuilder, GraphError, GraphStats, KernelClass, NodeId, NodeKind, SessionGraph};
pub use par::Execution;
