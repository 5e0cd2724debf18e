//! Labeled embedding datasets: loading, validation, synthesis, and the
//! probe/gallery/train split.
//!
//! On-disk layout is a JSON manifest next to a raw binary feature file of
//! little-endian 32-bit floats, row-major `[records x dim]`. In-memory
//! arithmetic is 64-bit; features are snapped to f32 precision on every
//! construction path so that write/load round-trips are bit-exact.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Record split within a store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Probe,
    Gallery,
    Train,
}

/// One image's embedding with identity and camera labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: u32,
    pub identity: u32,
    pub camera: u32,
    pub split: Split,
    pub feature: Vec<f64>,
}

/// Configuration for the synthetic embedding generator.
///
/// Each identity gets a unit-sphere centroid; each camera contributes a fixed
/// offset direction (orthogonalized against the centroid) scaled by
/// `camera_offset`; samples add isotropic gaussian noise of scale `sigma` and
/// are re-normalized. Camera directions follow a smooth viewpoint path, so
/// adjacent cameras look alike while the extremes differ sharply. A large
/// `camera_offset` then manufactures the hard cases of interest: positives
/// seen from distant viewpoints drift far from the probe while negatives
/// sharing its camera crowd in close, and the distant positives stay
/// reachable through same-identity images from intermediate cameras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub identities: usize,
    pub cameras: usize,
    pub per_camera: usize,
    pub dim: usize,
    pub sigma: f64,
    pub camera_offset: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            identities: 50,
            cameras: 4,
            per_camera: 4,
            dim: 16,
            sigma: 0.05,
            camera_offset: 1.2,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.identities < 1 || self.cameras < 1 || self.per_camera < 1 {
            return Err(Error::Config(
                "identities, cameras and per_camera must all be >= 1".into(),
            ));
        }
        if self.dim < 2 {
            return Err(Error::Config(format!(
                "dim = {} is too small to host distinct identity centroids (need >= 2)",
                self.dim
            )));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::Config("sigma must be finite and >= 0".into()));
        }
        if self.camera_offset < 0.0 || !self.camera_offset.is_finite() {
            return Err(Error::Config("camera_offset must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Manifest JSON schema. Key set is fixed; extra provenance lives in
/// sidecar files, never here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    count: usize,
    dim: usize,
    ids: Vec<u32>,
    identities: Vec<u32>,
    cameras: Vec<u32>,
    splits: Vec<Split>,
    normalized: bool,
    feature_file: String,
}

/// Immutable labeled embedding store.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<u32>,
    identities: Vec<u32>,
    cameras: Vec<u32>,
    splits: Vec<Split>,
    /// Row-major `len x dim`, every value exactly representable as f32.
    features: Vec<f64>,
    normalized: bool,
    by_id: HashMap<u32, usize>,
}

fn snap_f32(x: f64) -> f64 {
    x as f32 as f64
}

impl EmbeddingStore {
    /// Build a store from parallel label arrays and a feature matrix.
    pub fn from_parts(
        dim: usize,
        ids: Vec<u32>,
        identities: Vec<u32>,
        cameras: Vec<u32>,
        splits: Vec<Split>,
        mut features: Vec<f64>,
        normalized: bool,
    ) -> Result<Self> {
        let n = ids.len();
        if identities.len() != n || cameras.len() != n || splits.len() != n {
            return Err(Error::Manifest(format!(
                "label arrays disagree: ids={}, identities={}, cameras={}, splits={}",
                n,
                identities.len(),
                cameras.len(),
                splits.len()
            )));
        }
        if features.len() != n * dim {
            return Err(Error::Manifest(format!(
                "feature matrix holds {} values, expected {} ({} records x dim {})",
                features.len(),
                n * dim,
                n,
                dim
            )));
        }
        let mut by_id = HashMap::with_capacity(n);
        for (index, &id) in ids.iter().enumerate() {
            if by_id.insert(id, index).is_some() {
                return Err(Error::DuplicateId { index, id });
            }
        }
        for v in features.iter_mut() {
            *v = snap_f32(*v);
        }
        let store = Self {
            dim,
            ids,
            identities,
            cameras,
            splits,
            features,
            normalized,
            by_id,
        };
        store.warn_uncovered_probes();
        Ok(store)
    }

    fn warn_uncovered_probes(&self) {
        let multi_camera = {
            let mut cams = self.cameras.clone();
            cams.sort_unstable();
            cams.dedup();
            cams.len() > 1
        };
        let mut uncovered = 0usize;
        for i in self.probe_indices() {
            let covered = self.gallery_indices().into_iter().any(|g| {
                self.identities[g] == self.identities[i]
                    && (!multi_camera || self.cameras[g] != self.cameras[i])
            });
            if !covered {
                uncovered += 1;
            }
        }
        if uncovered > 0 {
            log::warn!(
                "{uncovered} probe record(s) have no cross-camera gallery match; \
                 they will be excluded from mAP with a reported count"
            );
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn id_at(&self, index: usize) -> u32 {
        self.ids[index]
    }

    pub fn identity_at(&self, index: usize) -> u32 {
        self.identities[index]
    }

    pub fn camera_at(&self, index: usize) -> u32 {
        self.cameras[index]
    }

    pub fn split_at(&self, index: usize) -> Split {
        self.splits[index]
    }

    pub fn index_of(&self, id: u32) -> Result<usize> {
        self.by_id
            .get(&id)
            .copied()
            .ok_or(Error::MissingRecord { id })
    }

    pub fn feature_at(&self, index: usize) -> &[f64] {
        &self.features[index * self.dim..(index + 1) * self.dim]
    }

    pub fn feature_of(&self, id: u32) -> Result<&[f64]> {
        Ok(self.feature_at(self.index_of(id)?))
    }

    pub fn record(&self, index: usize) -> EmbeddingRecord {
        EmbeddingRecord {
            id: self.ids[index],
            identity: self.identities[index],
            camera: self.cameras[index],
            split: self.splits[index],
            feature: self.feature_at(index).to_vec(),
        }
    }

    fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.splits[i] == split)
            .collect()
    }

    pub fn probe_indices(&self) -> Vec<usize> {
        self.split_indices(Split::Probe)
    }

    pub fn gallery_indices(&self) -> Vec<usize> {
        self.split_indices(Split::Gallery)
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.split_indices(Split::Train)
    }

    pub fn gallery_ids(&self) -> Vec<u32> {
        self.gallery_indices().into_iter().map(|i| self.ids[i]).collect()
    }

    pub fn probe_ids(&self) -> Vec<u32> {
        self.probe_indices().into_iter().map(|i| self.ids[i]).collect()
    }

    pub fn train_ids(&self) -> Vec<u32> {
        self.train_indices().into_iter().map(|i| self.ids[i]).collect()
    }

    /// Count of distinct cameras across the store.
    pub fn camera_count(&self) -> usize {
        let mut cams = self.cameras.clone();
        cams.sort_unstable();
        cams.dedup();
        cams.len()
    }

    /// Return a copy with every feature scaled to unit L2 norm.
    pub fn normalize(&self) -> Result<EmbeddingStore> {
        let mut features = self.features.clone();
        for i in 0..self.len() {
            let row = &mut features[i * self.dim..(i + 1) * self.dim];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroNorm { id: self.ids[i] });
            }
            for v in row.iter_mut() {
                *v = snap_f32(*v / norm);
            }
        }
        Ok(EmbeddingStore {
            dim: self.dim,
            ids: self.ids.clone(),
            identities: self.identities.clone(),
            cameras: self.cameras.clone(),
            splits: self.splits.clone(),
            features,
            normalized: true,
            by_id: self.by_id.clone(),
        })
    }

    /// Write manifest + binary feature payload. `manifest_path` names the
    /// JSON file; the payload lands next to it.
    pub fn write(&self, manifest_path: &Path) -> Result<()> {
        let feature_file = manifest_path
            .file_stem()
            .map(|s| format!("{}.bin", s.to_string_lossy()))
            .unwrap_or_else(|| "features.bin".to_string());
        let manifest = Manifest {
            count: self.len(),
            dim: self.dim,
            ids: self.ids.clone(),
            identities: self.identities.clone(),
            cameras: self.cameras.clone(),
            splits: self.splits.clone(),
            normalized: self.normalized,
            feature_file: feature_file.clone(),
        };
        if let Some(parent) = manifest_path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut payload = Vec::with_capacity(self.features.len() * 4);
        for &v in &self.features {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
        fs::write(sibling(manifest_path, &feature_file), payload)?;
        fs::write(manifest_path, serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }
}

fn sibling(manifest_path: &Path, file: &str) -> PathBuf {
    match manifest_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.join(file),
        _ => PathBuf::from(file),
    }
}

/// Load and validate a store from its manifest.
pub fn load(manifest_path: &Path) -> Result<EmbeddingStore> {
    let raw = fs::read(manifest_path)?;
    let manifest: Manifest = serde_json::from_slice(&raw)
        .map_err(|e| Error::Manifest(format!("{}: {e}", manifest_path.display())))?;

    let n = manifest.count;
    for (name, len) in [
        ("ids", manifest.ids.len()),
        ("identities", manifest.identities.len()),
        ("cameras", manifest.cameras.len()),
        ("splits", manifest.splits.len()),
    ] {
        if len != n {
            return Err(Error::Manifest(format!(
                "`{name}` holds {len} entries but `count` is {n}"
            )));
        }
    }
    if manifest.dim == 0 {
        return Err(Error::Manifest("`dim` must be positive".into()));
    }

    let payload = fs::read(sibling(manifest_path, &manifest.feature_file))?;
    let record_bytes = manifest.dim * 4;
    let complete = payload.len() / record_bytes;
    if complete < n {
        return Err(Error::TruncatedPayload {
            index: complete,
            declared: n,
            complete,
        });
    }

    let mut features = Vec::with_capacity(n * manifest.dim);
    for chunk in payload[..n * record_bytes].chunks_exact(4) {
        features.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64);
    }

    let store = EmbeddingStore::from_parts(
        manifest.dim,
        manifest.ids,
        manifest.identities,
        manifest.cameras,
        manifest.splits,
        features,
        manifest.normalized,
    )?;
    if manifest.normalized {
        store.normalize()
    } else {
        Ok(store)
    }
}

fn normalize_vec(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Generate a synthetic labeled store. Pure function of the config.
///
/// Identities are split in half: the first half becomes the train split, the
/// second half the test split where each identity's first camera-0 image is
/// the probe and everything else is gallery.
pub fn synth_generate(cfg: &SynthConfig) -> Result<EmbeddingStore> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed, "synth");
    let d = cfg.dim;

    let mut centroids = Vec::with_capacity(cfg.identities);
    for _ in 0..cfg.identities {
        let mut c: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if normalize_vec(&mut c) == 0.0 {
            c[0] = 1.0;
        }
        centroids.push(c);
    }

    // Viewpoint path: camera directions sweep a 150-degree arc inside a
    // random 2-plane, so camera c and c+1 stay similar while the first and
    // last cameras point nearly opposite ways.
    let mut plane_u: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    if normalize_vec(&mut plane_u) == 0.0 {
        plane_u[0] = 1.0;
    }
    let mut plane_v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let uv: f64 = plane_u.iter().zip(&plane_v).map(|(a, b)| a * b).sum();
    for (v, u) in plane_v.iter_mut().zip(&plane_u) {
        *v -= uv * u;
    }
    if normalize_vec(&mut plane_v) < 1e-9 {
        plane_v = vec![0.0; d];
        plane_v[0] = -plane_u[1];
        plane_v[1] = plane_u[0];
        normalize_vec(&mut plane_v);
    }
    let mut camera_dirs = Vec::with_capacity(cfg.cameras);
    for camera in 0..cfg.cameras {
        let theta = if cfg.cameras > 1 {
            150f64.to_radians() * camera as f64 / (cfg.cameras - 1) as f64
        } else {
            0.0
        };
        let o: Vec<f64> = plane_u
            .iter()
            .zip(&plane_v)
            .map(|(u, v)| theta.cos() * u + theta.sin() * v)
            .collect();
        camera_dirs.push(o);
    }

    let n = cfg.identities * cfg.cameras * cfg.per_camera;
    let mut ids = Vec::with_capacity(n);
    let mut identities = Vec::with_capacity(n);
    let mut cameras = Vec::with_capacity(n);
    let mut splits = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * d);

    let train_identities = cfg.identities / 2;
    let mut next_id = 0u32;
    for identity in 0..cfg.identities {
        let centroid = &centroids[identity];
        for camera in 0..cfg.cameras {
            // Offsets change appearance direction, not magnitude: project the
            // camera direction off the centroid before scaling.
            let dot: f64 = camera_dirs[camera]
                .iter()
                .zip(centroid)
                .map(|(a, b)| a * b)
                .sum();
            let mut offset: Vec<f64> = camera_dirs[camera]
                .iter()
                .zip(centroid)
                .map(|(o, c)| o - dot * c)
                .collect();
            if normalize_vec(&mut offset) < 1e-9 {
                // Camera direction collinear with the centroid; fall back to a
                // coordinate rotation that is orthogonal by construction.
                offset = vec![0.0; d];
                offset[0] = -centroid[1];
                offset[1] = centroid[0];
                if normalize_vec(&mut offset) == 0.0 {
                    offset[0] = 1.0;
                }
            }
            for sample in 0..cfg.per_camera {
                let mut feature: Vec<f64> = (0..d)
                    .map(|j| {
                        centroid[j]
                            + cfg.camera_offset * offset[j]
                            + cfg.sigma * rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect();
                if normalize_vec(&mut feature) == 0.0 {
                    feature[0] = 1.0;
                }
                let split = if identity < train_identities {
                    Split::Train
                } else if camera == 0 && sample == 0 {
                    Split::Probe
                } else {
                    Split::Gallery
                };
                ids.push(next_id);
                identities.push(identity as u32);
                cameras.push(camera as u32);
                splits.push(split);
                features.extend_from_slice(&feature);
                next_id += 1;
            }
        }
    }

    EmbeddingStore::from_parts(d, ids, identities, cameras, splits, features, true)
}
