//! Gallery candidate selection per probe: plain top-k or the two-hop hard
//! gallery sampler.
//!
//! The two-hop sampler first takes the k1 nearest galleries, then walks each
//! first-hop neighbor's own k2 nearest galleries, dropping overlap with the
//! first hop, until the candidate budget k is full. Hard positives that sit
//! far from the probe are reached through easy positives acting as bridges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn;
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Plain,
    Hgs,
}

impl std::fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamplerMode::Plain => write!(f, "plain"),
            SamplerMode::Hgs => write!(f, "hgs"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub k1: usize,
    pub k2: usize,
    pub k: usize,
    pub mode: SamplerMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            k1: 70,
            k2: 20,
            k: 100,
            mode: SamplerMode::Hgs,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k1 < 1 || self.k1 > self.k {
            return Err(Error::Config(format!(
                "sampler requires 1 <= k1 <= k, got k1 = {}, k = {}",
                self.k1, self.k
            )));
        }
        if self.k2 < 1 {
            return Err(Error::Config("sampler requires k2 >= 1".into()));
        }
        Ok(())
    }
}

/// Ordered gallery candidates for one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub probe_id: u32,
    pub ids: Vec<u32>,
    /// identity(candidate) == identity(probe), when labels are known.
    pub labels: Option<Vec<bool>>,
}

impl CandidateSet {
    fn with_labels(probe_id: u32, ids: Vec<u32>, store: &EmbeddingStore) -> Result<Self> {
        let probe_identity = store.identity_at(store.index_of(probe_id)?);
        let labels = ids
            .iter()
            .map(|&id| Ok(store.identity_at(store.index_of(id)?) == probe_identity))
            .collect::<Result<Vec<bool>>>()?;
        Ok(Self {
            probe_id,
            ids,
            labels: Some(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.labels
            .as_ref()
            .map(|l| l.iter().filter(|&&b| b).count())
            .unwrap_or(0)
    }
}

/// Plain sampler: the k nearest galleries, order preserved.
pub fn plain_sample(
    store: &EmbeddingStore,
    probe_id: u32,
    gallery_ids: &[u32],
    k: usize,
) -> Result<CandidateSet> {
    if gallery_ids.is_empty() {
        return Err(Error::Config("plain sampler needs a non-empty gallery".into()));
    }
    let ids = knn::topk(store, probe_id, gallery_ids, k)?.ids();
    CandidateSet::with_labels(probe_id, ids, store)
}

/// Two-hop hard gallery sampler.
///
/// Candidates start as the k1 nearest galleries. Then, in first-hop rank
/// order, each neighbor's k2 nearest galleries (self excluded) are appended
/// after removing first-hop overlap, skipping anything already selected,
/// stopping exactly at k. Returns short without padding when the expansions
/// cannot fill the budget.
pub fn hgs_sample(
    store: &EmbeddingStore,
    probe_id: u32,
    gallery_ids: &[u32],
    cfg: &SamplerConfig,
) -> Result<CandidateSet> {
    cfg.validate()?;
    if gallery_ids.len() < cfg.k1 {
        return Err(Error::GalleryTooSmall {
            gallery: gallery_ids.len(),
            k1: cfg.k1,
        });
    }

    let first_hop = knn::topk(store, probe_id, gallery_ids, cfg.k1)?.ids();
    let mut selected: Vec<u32> = first_hop.clone();

    if selected.len() < cfg.k {
        'expansion: for &bridge in &first_hop {
            for id in second_hop(store, bridge, gallery_ids, cfg.k2, &first_hop)? {
                if selected.contains(&id) {
                    continue;
                }
                selected.push(id);
                if selected.len() == cfg.k {
                    break 'expansion;
                }
            }
        }
    }

    CandidateSet::with_labels(probe_id, selected, store)
}

/// One neighbor's k2-nearest galleries with first-hop overlap removed,
/// rank order preserved. The bridge itself never appears (self-match), and
/// the probe cannot appear because it is not a gallery member.
fn second_hop(
    store: &EmbeddingStore,
    bridge: u32,
    gallery_ids: &[u32],
    k2: usize,
    first_hop: &[u32],
) -> Result<Vec<u32>> {
    let mut ids = knn::topk(store, bridge, gallery_ids, k2)?.ids();
    ids.retain(|id| !first_hop.contains(id));
    Ok(ids)
}

/// Sample with the configured mode.
pub fn sample(
    store: &EmbeddingStore,
    probe_id: u32,
    gallery_ids: &[u32],
    cfg: &SamplerConfig,
) -> Result<CandidateSet> {
    match cfg.mode {
        SamplerMode::Plain => plain_sample(store, probe_id, gallery_ids, cfg.k),
        SamplerMode::Hgs => hgs_sample(store, probe_id, gallery_ids, cfg),
    }
}

/// Positive coverage of a candidate set against the full gallery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    /// `None` when the probe has no cross-camera positive at all.
    pub recall: Option<f64>,
    /// Fraction of candidates sharing the probe identity.
    pub precision: f64,
    pub positives_sampled: usize,
    pub positives_total: usize,
}

/// Recall/precision of positives inside a candidate set.
///
/// Positives are cross-camera same-identity gallery records when the store
/// spans several cameras, and plain same-identity records otherwise.
pub fn recall_report(
    candidates: &CandidateSet,
    store: &EmbeddingStore,
    gallery_ids: &[u32],
) -> Result<RecallReport> {
    let probe = store.index_of(candidates.probe_id)?;
    let probe_identity = store.identity_at(probe);
    let probe_camera = store.camera_at(probe);
    let multi_camera = store.camera_count() > 1;

    let is_positive = |index: usize| {
        store.identity_at(index) == probe_identity
            && (!multi_camera || store.camera_at(index) != probe_camera)
    };

    let mut positives_total = 0usize;
    for &id in gallery_ids {
        if is_positive(store.index_of(id)?) {
            positives_total += 1;
        }
    }
    let mut positives_sampled = 0usize;
    let mut identity_matches = 0usize;
    for &id in &candidates.ids {
        let index = store.index_of(id)?;
        if is_positive(index) {
            positives_sampled += 1;
        }
        if store.identity_at(index) == probe_identity {
            identity_matches += 1;
        }
    }

    let recall = if positives_total == 0 {
        None
    } else {
        Some(positives_sampled as f64 / positives_total as f64)
    };
    let precision = if candidates.ids.is_empty() {
        0.0
    } else {
        identity_matches as f64 / candidates.ids.len() as f64
    };
    Ok(RecallReport {
        recall,
        precision,
        positives_sampled,
        positives_total,
    })
}
