//! Context graph construction: node features from probe-gallery differences,
//! edge support from gallery-gallery neighborhoods.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn;
use crate::sampler::CandidateSet;
use crate::store::EmbeddingStore;

/// Which features feed the learnable edge-weight bilinear form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeInput {
    /// Probe-gallery difference vectors (node features).
    Nodes,
    /// Raw gallery features.
    Gallery,
}

impl Default for EdgeInput {
    fn default() -> Self {
        EdgeInput::Nodes
    }
}

/// One probe's candidate graph.
///
/// `x` holds probe-gallery differences row per candidate; `support` is the
/// binary adjacency mask (zero diagonal, at most k' ones per row, not
/// necessarily symmetric); `gallery` keeps the raw candidate features for
/// edge scoring when configured.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextGraph {
    pub probe_id: u32,
    pub candidate_ids: Vec<u32>,
    pub x: Array2<f64>,
    pub gallery: Array2<f64>,
    pub support: Array2<u8>,
    pub labels: Option<Vec<bool>>,
}

impl ContextGraph {
    pub fn node_count(&self) -> usize {
        self.candidate_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Node features or gallery features, per the edge-input switch.
    pub fn edge_inputs(&self, which: EdgeInput) -> &Array2<f64> {
        match which {
            EdgeInput::Nodes => &self.x,
            EdgeInput::Gallery => &self.gallery,
        }
    }

    /// Supported column indices of one row, ascending.
    pub fn support_row(&self, i: usize) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&j| self.support[(i, j)] != 0)
            .collect()
    }
}

/// Node feature matrix: row i = f_p - f_{g_i}, candidate order preserved.
pub fn build_nodes(
    store: &EmbeddingStore,
    probe_id: u32,
    candidates: &CandidateSet,
) -> Result<Array2<f64>> {
    let probe = Array1::from(store.feature_of(probe_id)?.to_vec());
    let mut x = Array2::zeros((candidates.len(), store.dim()));
    for (i, &id) in candidates.ids.iter().enumerate() {
        let g = store.feature_of(id)?;
        for (j, v) in g.iter().enumerate() {
            x[(i, j)] = probe[j] - v;
        }
    }
    Ok(x)
}

/// Binary support mask: `support[i][j] = 1` iff g_j is among the k' nearest
/// members of the candidate set to g_i (self excluded), by gallery-gallery
/// similarity on stored features. k' clamps to n-1.
pub fn build_support(
    store: &EmbeddingStore,
    candidates: &CandidateSet,
    k_prime: usize,
) -> Result<Array2<u8>> {
    if k_prime < 1 {
        return Err(Error::Config("k' must be >= 1".into()));
    }
    let n = candidates.len();
    let mut support = Array2::zeros((n, n));
    if n < 2 {
        return Ok(support);
    }
    let column_of: std::collections::HashMap<u32, usize> = candidates
        .ids
        .iter()
        .enumerate()
        .map(|(j, &id)| (id, j))
        .collect();
    for (i, &gi) in candidates.ids.iter().enumerate() {
        let neighbors = knn::topk(store, gi, &candidates.ids, k_prime.min(n - 1))?;
        for neighbor in &neighbors.neighbors {
            support[(i, column_of[&neighbor.id])] = 1;
        }
    }
    Ok(support)
}

/// Assemble the full graph for one probe.
pub fn build_graph(
    store: &EmbeddingStore,
    probe_id: u32,
    candidates: &CandidateSet,
    k_prime: usize,
) -> Result<ContextGraph> {
    let x = build_nodes(store, probe_id, candidates)?;
    let support = build_support(store, candidates, k_prime)?;
    let mut gallery = Array2::zeros((candidates.len(), store.dim()));
    for (i, &id) in candidates.ids.iter().enumerate() {
        let f = store.feature_of(id)?;
        for (j, v) in f.iter().enumerate() {
            gallery[(i, j)] = *v;
        }
    }
    Ok(ContextGraph {
        probe_id,
        candidate_ids: candidates.ids.clone(),
        x,
        gallery,
        support,
        labels: candidates.labels.clone(),
    })
}

/// Serializable dump of a graph's structure for inspection tooling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDump {
    pub probe_id: u32,
    pub candidate_ids: Vec<u32>,
    pub labels: Option<Vec<u8>>,
    /// Row i lists the candidate ids g_i is connected to.
    pub support_rows: Vec<Vec<u32>>,
}

impl GraphDump {
    pub fn from_graph(graph: &ContextGraph) -> Self {
        let support_rows = (0..graph.node_count())
            .map(|i| {
                graph
                    .support_row(i)
                    .into_iter()
                    .map(|j| graph.candidate_ids[j])
                    .collect()
            })
            .collect();
        Self {
            probe_id: graph.probe_id,
            candidate_ids: graph.candidate_ids.clone(),
            labels: graph
                .labels
                .as_ref()
                .map(|l| l.iter().map(|&b| b as u8).collect()),
            support_rows,
        }
    }
}
