//! Central finite-difference verification of the analytic gradients.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::graph::ContextGraph;

use super::backward::backward;
use super::forward::{forward_batch, Mode};
use super::loss::focal_loss_weighted;
use super::{ModelGrads, ModelParams};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub max_rel_err: f64,
    pub params: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_err < self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_err)
            .fold(0.0, f64::max)
    }
}

fn batch_weights(graphs: &[&ContextGraph]) -> (Vec<bool>, Vec<f64>) {
    let batch = graphs.len() as f64;
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for graph in graphs {
        let graph_labels = graph
            .labels
            .as_ref()
            .
expect("gradient check needs labeled graphs");
        let w = 1.0 / (batch * graph.node_count() as f64);
        labels.extend(graph_labels.iter().copied());
        weights.extend(std::iter::repeat(w).take(graph.node_count()));
    }
    (labels, weights)
}

/// Batch focal loss under the training reduction (per-graph mean, then mean
/// over graphs), as a pure function of the parameters.
pub fn batch_loss(
    params: &ModelParams,
    graphs: &[&ContextGraph],
    alpha: f64,
    gamma: f64,
) -> Result<f64> {
    let cache = forward_batch(params, graphs, Mode::Train)?;
    let (labels, weights) = batch_weights(graphs);
    let (loss, _) = focal_loss_weighted(&cache.logits, &labels, &weights, alpha, gamma);
    Ok(loss)
}

/// Analytic gradients of [`batch_loss`].
pub fn batch_loss_grads(
    params: &ModelParams,
    graphs: &[&ContextGraph],
    alpha: f64,
    gamma: f64,
) -> Result<(f64, ModelGrads)> {
    let cache = forward_batch(params, graphs, Mode::Train)?;
    let (labels, weights) = batch_weights(graphs);
    let (loss, dlogits) = focal_loss_weighted(&cache.logits, &labels, &weights, alpha, gamma);
    let grads = backward(params, graphs, &cache, &dlogits)?;
    Ok((loss, grads))
}

/// Compare analytic gradients against central finite differences for every
/// parameter of every block.
///
/// Relative error uses `|a - f| / max(|a|, |f|, 1e-6)`; the floor keeps
/// finite-difference noise on essentially-zero gradients from registering as
/// spurious relative error.
pub fn gradient_check(
    params: &ModelParams,
    graphs: &[&ContextGraph],
    alpha: f64,
    gamma: f64,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = batch_loss_grads(params, graphs, alpha, gamma)?;
    let mut work = params.clone();
    let mut blocks = Vec::new();
    let names = params.block_names();
    for (block_index, name) in names.iter().enumerate() {
        let len = analytic.blocks()[block_index].1.len();
        let mut max_rel = 0.0f64;
        for idx in 0..len {
            let original = {
                let b = work.blocks_mut();
                b[block_index].1[idx]
            };
            set_param(&mut work, block_index, idx, original + step);
            let up = batch_loss(&work, graphs, alpha, gamma)?;
            set_param(&mut work, block_index, idx, original - step);
            let down = batch_loss(&work, graphs, alpha, gamma)?;
            set_param(&mut work, block_index, idx, original);
            let fd = (up - down) / (2.0 * step);
            let an = analytic.blocks()[block_index].1[idx];
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
        if !max_rel.is_finite() {
            return Err(Error::NonFiniteGradient {
                block: name.clone(),
            });
        }
        blocks.push(BlockReport {
            name: name.clone(),
            max_rel_err: max_rel,
            params: len,
        });
    }
    Ok(GradCheckReport { blocks, tolerance })
}

fn set_param(params: &mut ModelParams, block: usize, idx: usize, value: f64) {
    let mut blocks = params.blocks_mut();
    blocks[block].1[idx] = value;
}

/// Deterministic labeled graph for self-checks, shaped like sampler output.
pub fn synthetic_check_graph(n: usize, dim: usize, k_prime: usize, seed: u64) -> ContextGraph {
    use rand::Rng;
    let mut rng = crate::seed::rng(seed, "gradcheck-graph");
    let x = ndarray::Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0));
    let gallery = ndarray::Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0));
    let mut support = ndarray::Array2::zeros((n, n));
    if n > 1 {
        for i in 0..n {
            // k' pseudo-random distinct neighbors per row.
            let mut placed = 0;
            let mut j = rng.random_range(0..n);
            while placed < k_prime.min(n - 1) {
                if j != i && support[(i, j)] == 0 {
                    support[(i, j)] = 1;
                    placed += 1;
                }
                j = (j + 1) % n;
            }
        }
    }
    let labels = (0..n).map(|_| rng.random_range(0..3) == 0).collect();
    ContextGraph {
        probe_id: 0,
        candidate_ids: (1..=n as u32).collect(),
        x,
        gallery,
        support,
        labels: Some(labels),
    }
}

/// Logits of a fixed graph under fixed parameters, for golden-value tests.
pub fn golden_logits(seed: u64, n: usize, dim: usize, layers: usize) -> Result<Array1<f64>> {
    let cfg = super::ModelConfig {
        layers,
        ..super::ModelConfig::new(dim)
    };
    let params = ModelParams::init(cfg, seed)?;
    let graph = synthetic_check_graph(n, dim, 3, seed);
    Ok(forward_batch(&params, &[&graph], Mode::Train)?.logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let cfg = ModelConfig {
            dim: 5,
            edge_dim: 4,
            layers: 2,
            hidden: 7,
            ..ModelConfig::new(5)
        };
        let params = ModelParams::init(cfg, 17).unwrap();
        let graph = synthetic_check_graph(8, 5, 3, 17);
        let report =
            gradient_check(&params, &[&graph], 2.0, 0.25, DEFAULT_STEP, DEFAULT_TOLERANCE)
                .unwrap();
        assert!(
            report.passed(),
            "worst relative error {} in {:?}",
            report.worst(),
            report
                .blocks
                .iter()
                .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
                .map(|b| &b.name)
        );
    }

    #[test]
    fn gradcheck_on_batch_of_mixed_sizes() {
        let cfg = ModelConfig {
            dim: 4,
            edge_dim: 4,
            layers: 2,
            hidden: 6,
            ..ModelConfig::new(4)
        };
        let params = ModelParams::init(cfg, 23).unwrap();
        let g1 = synthetic_check_graph(3, 4, 2, 5);
        let g2 = synthetic_check_graph(6, 4, 3, 7);
        let report = gradient_check(
            &params,
            &[&g1, &g2],
            2.0,
            0.25,
            DEFAULT_STEP,
            DEFAULT_TOLERANCE,
        )
        .unwrap();
        assert!(report.passed(), "worst {}", report.worst());
    }

    #[test]
    fn report_lists_every_block_once() {
        let cfg = ModelConfig {
            dim: 3,
            edge_dim: 3,
            layers: 2,
            hidden: 4,
            ..ModelConfig::new(3)
        };
        let params = ModelParams::init(cfg, 29).unwrap();
        let graph = synthetic_check_graph(4, 3, 2, 11);
        let report =
            gradient_check(&params, &[&graph], 1.0, 0.0, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        let mut names: Vec<&str> = report.blocks.iter().map(|b| b.name.as_str()).collect();
        let total = names.len();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), total);
        assert_eq!(total, params.block_names().len());
    }
}
