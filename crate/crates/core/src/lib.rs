//! Graph-based re-ranking over precomputed re-identification embeddings.
//!
//! The pipeline: load or synthesize a labeled embedding store, pick gallery
//! candidates per probe with a two-hop hard gallery sampler, build a sparse
//! context graph over the candidates, score each probe-gallery pair with a
//! residual GCN trained under focal loss, and fuse the learned distance with
//! the original cosine distance for the final ranking.

pub mod error;
pub mod evaluator;
pub mod graph;
pub mod knn;
pub mod model;
pub mod sampler;
pub mod seed;
pub mod store;
pub mod trainer;

pub use error::{Error, Result};
