//! Exact similarity computation and top-k neighbor retrieval.
//!
//! Exhaustive search only: candidate sets stay at desk scale and both
//! training and evaluation demand bit-deterministic neighbor orderings.
//! Distance convention on normalized features: `d_o = 1 - similarity`.

use crate::error::{Error, Result};
use crate::store::EmbeddingStore;

/// One retrieved neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub similarity: f64,
}

/// Neighbors of one query, ordered by (similarity desc, id asc).
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query_id: u32,
    pub neighbors: Vec<Neighbor>,
}

impl NeighborList {
    pub fn ids(&self) -> Vec<u32> {
        self.neighbors.iter().map(|n| n.id).collect()
    }
}

/// Dot product; equals cosine similarity on unit vectors.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "similarity of mismatched dimensions {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dot(a, b))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine distance under the store's convention.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(1.0 - similarity(a, b)?)
}

fn ordered(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.id.cmp(&b.id))
}

/// Exhaustive top-k by feature against a candidate id list.
///
/// `query_id`, when the query is itself a member of the searched set, removes
/// the self-match. `k` clamps to the candidate count; ties break by
/// ascending id.
pub fn topk_by_feature(
    store: &EmbeddingStore,
    query: &[f64],
    query_id: Option<u32>,
    candidate_ids: &[u32],
    k: usize,
) -> Result<NeighborList> {
    if query.len() != store.dim() {
        return Err(Error::Config(format!(
            "query dimension {} does not match store dimension {}",
            query.len(),
            store.dim()
        )));
    }
    let mut scored = Vec::with_capacity(candidate_ids.len());
    for &id in candidate_ids {
        if query_id == Some(id) {
            continue;
        }
        let feature = store.feature_of(id)?;
        scored.push(Neighbor {
            id,
            similarity: dot(query, feature),
        });
    }
    let keep = k.min(scored.len());
    if keep < scored.len() {
        scored.select_nth_unstable_by(keep, ordered);
        scored.truncate(keep);
    }
    scored.sort_unstable_by(ordered);
    Ok(NeighborList {
        query_id: query_id.unwrap_or(u32::MAX),
        neighbors: scored,
    })
}

/// Exhaustive top-k for a stored record against a candidate id list.
pub fn topk(
    store: &EmbeddingStore,
    query_id: u32,
    candidate_ids: &[u32],
    k: usize,
) -> Result<NeighborList> {
    let query = store.feature_of(query_id)?;
    let mut list = topk_by_feature(store, query, Some(query_id), candidate_ids, k)?;
    list.query_id = query_id;
    Ok(list)
}
