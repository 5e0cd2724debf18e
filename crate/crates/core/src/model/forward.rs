//! Forward pass: edge softmax, residual GCN blocks with batchnorm, input
//! concatenation, MLP head.
//!
//! A batch of graphs is processed as one block-diagonal super-graph: node
//! rows are stacked, adjacency stays per graph, and batchnorm statistics run
//! over all nodes of the step. The pass never mutates parameters; batch
//! statistics are returned in the cache and folded into the running averages
//! by an explicit trainer call.

use ndarray::{s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::ContextGraph;

use super::{BatchNorm, ModelParams};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Row-softmax edge weights of one graph plus the intermediates the backward
/// pass needs.
#[derive(Debug, Clone)]
pub struct EdgeCache {
    /// n x n; zero outside the support mask, rows with support sum to 1.
    pub a: Array2<f64>,
    /// phi applied to every node's edge input, n x d_e.
    pub u: Array2<f64>,
    /// phi' applied to every node's edge input, n x d_e.
    pub v: Array2<f64>,
}

/// Per-layer intermediates of the batch.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// A Z, stacked N x d.
    pub aggregated: Array2<f64>,
    /// (A Z) W before the ReLU.
    pub pre_activation: Array2<f64>,
    /// Normalized activations (before scale/shift).
    pub xhat: Array2<f64>,
    /// 1 / sqrt(var + eps) per channel, for whichever statistics were used.
    pub inv_std: Array1<f64>,
    /// Batch statistics (train mode), for the running-average update.
    pub batch_mean: Array1<f64>,
    pub batch_var: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub mode: Mode,
    /// Start row of each graph in the stacked arrays, plus the total.
    pub offsets: Vec<usize>,
    pub edges: Vec<EdgeCache>,
    /// Z_0 .. Z_L, each N x d.
    pub z: Vec<Array2<f64>>,
    pub layers: Vec<LayerCache>,
    /// [X | Z_L], N x 2d.
    pub concat: Array2<f64>,
    pub mlp1_pre: Array2<f64>,
    pub mlp1_out: Array2<f64>,
    pub mlp2_pre: Array2<f64>,
    pub mlp2_out: Array2<f64>,
    pub logits: Array1<f64>,
}

impl ForwardCache {
    pub fn node_count(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Logits of one graph in the batch.
    pub fn graph_logits(&self, g: usize) -> Array1<f64> {
        self.logits
            .slice(s![self.offsets[g]..self.offsets[g + 1]])
            .to_owned()
    }
}

fn affine(inputs: &Array2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    inputs.dot(&w.t()) + b
}

/// Learnable edge weights: row-softmax of a bilinear form over supported
/// pairs. Rows with empty support stay all-zero. Exponent overflow is
/// prevented by per-row max subtraction.
pub fn edge_weights(
    params: &ModelParams,
    inputs: &Array2<f64>,
    support: &Array2<u8>,
) -> Result<EdgeCache> {
    let n = inputs.nrows();
    if support.nrows() != n || support.ncols() != n {
        return Err(Error::Config(format!(
            "support mask {}x{} does not match {n} nodes",
            support.nrows(),
            support.ncols()
        )));
    }
    let u = affine(inputs, &params.phi_w, &params.phi_b);
    let v = affine(inputs, &params.phi_prime_w, &params.phi_prime_b);
    let scores = u.dot(&v.t());

    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        let supported: Vec<usize> = (0..n).filter(|&j| support[(i, j)] != 0).collect();
        if supported.is_empty() {
            continue;
        }
        let max = supported
            .iter()
            .map(|&j| scores[(i, j)])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for &j in &supported {
            let e = (scores[(i, j)] - max).exp();
            a[(i, j)] = e;
            total += e;
        }
        for &j in &supported {
            a[(i, j)] /= total;
        }
    }
    Ok(EdgeCache { a, u, v })
}

fn batchnorm_stats(values: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let n = values.nrows() as f64;
    let mean = values.sum_axis(Axis(0)) / n;
    let mut var = Array1::zeros(values.ncols());
    for row in values.rows() {
        for (c, &x) in row.iter().enumerate() {
            let d = x - mean[c];
            var[c] += d * d;
        }
    }
    var /= n;
    (mean, var)
}

/// One residual block on a stacked batch: Z + BN(ReLU(A Z W)).
///
/// `adjacency` holds one matrix per graph, aligned with `offsets`.
fn residual_block(
    z: &Array2<f64>,
    adjacency: &[&Array2<f64>],
    offsets: &[usize],
    w: &Array2<f64>,
    bn: &BatchNorm,
    mode: Mode,
) -> (Array2<f64>, LayerCache) {
    let (n, d) = z.dim();
    let mut aggregated = Array2::zeros((n, d));
    for (g, a) in adjacency.iter().enumerate() {
        let rows = s![offsets[g]..offsets[g + 1], ..];
        let block = a.dot(&z.slice(rows));
        aggregated.slice_mut(rows).assign(&block);
    }
    let pre_activation = aggregated.dot(w);
    let activated = pre_activation.mapv(|x| x.max(0.0));

    let (batch_mean, batch_var) = batchnorm_stats(&activated);
    let (mean, var) = match mode {
        Mode::Train => (batch_mean.clone(), batch_var.clone()),
        Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
    };
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let mut xhat = activated;
    for mut row in xhat.rows_mut() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = (*x - mean[c]) * inv_std[c];
        }
    }
    let mut out = xhat.clone();
    for mut row in out.rows_mut() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = bn.gamma[c] * *x + bn.beta[c];
        }
    }
    let next = z + &out;
    (
        next,
        LayerCache {
            aggregated,
            pre_activation,
            xhat,
            inv_std,
            batch_mean,
            batch_var,
        },
    )
}

/// Single-graph residual block, as used by tests and documentation of the
/// layer contract. `bn: None` skips normalization entirely (test harness
/// only; the full model always normalizes).
pub fn gcn_block(
    z: &Array2<f64>,
    a: &Array2<f64>,
    w: &Array2<f64>,
    bn: Option<(&BatchNorm, Mode)>,
) -> Array2<f64> {
    match bn {
        Some((bn, mode)) => {
            let offsets = [0, z.nrows()];
            let (next, _) = residual_block(z, &[a], &offsets, w, bn, mode);
            next
        }
        None => {
            let pre = a.dot(z).dot(w);
            z + &pre.mapv(|x| x.max(0.0))
        }
    }
}

/// Forward over a batch of graphs.
///
/// Edge weights are computed once per graph from the configured edge inputs
/// and shared by every layer. Train mode normalizes with batch statistics
/// across all nodes of the batch; eval mode uses the stored running
/// statistics, making per-graph results independent of batch composition.
pub fn forward_batch(
    params: &ModelParams,
    graphs: &[&ContextGraph],
    mode: Mode,
) -> Result<ForwardCache> {
    if graphs.is_empty() {
        return Err(Error::Config("forward pass needs at least one graph".into()));
    }
    let d = params.cfg.dim;
    let mut offsets = vec![0usize];
    for graph in graphs {
        if graph.dim() != d {
            return Err(Error::Config(format!(
                "graph dimension {} does not match model dimension {d}",
                graph.dim()
            )));
        }
        if graph.node_count() == 0 {
            return Err(Error::Config("graph with zero nodes".into()));
        }
        offsets.push(offsets.last().unwrap() + graph.node_count());
    }
    let n = *offsets.last().unwrap();

    let mut edges = Vec::with_capacity(graphs.len());
    for graph in graphs {
        edges.push(edge_weights(
            params,
            graph.edge_inputs(params.cfg.edge_input),
            &graph.support,
        )?);
    }

    let mut z0 = Array2::zeros((n, d));
    for (g, graph) in graphs.iter().enumerate() {
        z0.slice_mut(s![offsets[g]..offsets[g + 1], ..])
            .assign(&graph.x);
    }

    let adjacency: Vec<&Array2<f64>> = edges.iter().map(|e| &e.a).collect();
    let mut z = vec![z0];
    let mut layers = Vec::with_capacity(params.cfg.layers);
    for l in 0..params.cfg.layers {
        let (next, cache) = residual_block(
            z.last().unwrap(),
            &adjacency,
            &offsets,
            &params.gcn_w[l],
            &params.bn[l],
            mode,
        );
        z.push(next);
        layers.push(cache);
    }

    let z_last = z.last().unwrap();
    let mut concat = Array2::zeros((n, 2 * d));
    concat.slice_mut(s![.., 0..d]).assign(&z[0]);
    concat.slice_mut(s![.., d..2 * d]).assign(z_last);

    let mlp1_pre = affine(&concat, &params.mlp1_w, &params.mlp1_b);
    let mlp1_out = mlp1_pre.mapv(|x| x.max(0.0));
    let mlp2_pre = affine(&mlp1_out, &params.mlp2_w, &params.mlp2_b);
    let mlp2_out = mlp2_pre.mapv(|x| x.max(0.0));
    let logits = mlp2_out.dot(&params.mlp3_w) + params.mlp3_b;

    Ok(ForwardCache {
        mode,
        offsets,
        edges,
        z,
        layers,
        concat,
        mlp1_pre,
        mlp1_out,
        mlp2_pre,
        mlp2_out,
        logits,
    })
}

/// Eval-mode logits for a single graph.
pub fn forward_eval(params: &ModelParams, graph: &ContextGraph) -> Result<Array1<f64>> {
    Ok(forward_batch(params, &[graph], Mode::Eval)?.logits)
}

/// Fold the batch statistics of a completed train-mode forward into the
/// running averages. The running variance uses the unbiased estimate.
pub fn update_running_stats(params: &mut ModelParams, cache: &ForwardCache) {
    debug_assert_eq!(cache.mode, Mode::Train);
    let n = cache.node_count() as f64;
    let correction = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
    for (l, layer) in cache.layers.iter().enumerate() {
        let bn = &mut params.bn[l];
        for c in 0..bn.running_mean.len() {
            bn.running_mean[c] =
                (1.0 - BN_MOMENTUM) * bn.running_mean[c] + BN_MOMENTUM * layer.batch_mean[c];
            bn.running_var[c] = (1.0 - BN_MOMENTUM) * bn.running_var[c]
                + BN_MOMENTUM * layer.batch_var[c] * correction;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeInput;
    use crate::model::ModelConfig;
    use ndarray::arr2;
    use rand::Rng;

    fn test_params(dim: usize, layers: usize, seed: u64) -> ModelParams {
        ModelParams::init(
            ModelConfig {
                layers,
                ..ModelConfig::new(dim)
            },
            seed,
        )
        .unwrap()
    }

    fn random_graph(n: usize, dim: usize, k_prime: usize, seed: u64) -> ContextGraph {
        let mut rng = crate::seed::rng(seed, "test-graph");
        let x = Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0));
        let gallery = Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0));
        let mut support = Array2::zeros((n, n));
        for i in 0..n {
            let mut picked = 0;
            let mut j = (i + 1) % n;
            while picked < k_prime.min(n.saturating_sub(1)) {
                support[(i, j)] = 1;
                picked += 1;
                j = (j + 1) % n;
                if j == i {
                    j = (j + 1) % n;
                }
            }
        }
        let labels = (0..n).map(|i| i % 3 == 0).collect();
        ContextGraph {
            probe_id: 0,
            candidate_ids: (1..=n as u32).collect(),
            x,
            gallery,
            support,
            labels: Some(labels),
        }
    }

    #[test]
    fn singleton_support_row_gets_weight_one() {
        let params = test_params(3, 1, 2);
        let inputs = Array2::from_shape_fn((3, 3), |(i, j)| (i + j) as f64 * 0.1);
        let support = arr2(&[[0u8, 1, 0], [1, 0, 1], [0, 0, 0]]);
        let cache = edge_weights(&params, &inputs, &support).unwrap();
        assert!((cache.a[(0, 1)] - 1.0).abs() < 1e-15);
        let row1: f64 = cache.a.row(1).sum();
        assert!((row1 - 1.0).abs() < 1e-12);
        // Empty support row stays all-zero.
        assert_eq!(cache.a.row(2).sum(), 0.0);
    }

    #[test]
    fn zero_transforms_give_uniform_weights() {
        let mut params = test_params(3, 1, 2);
        params.phi_w.fill(0.0);
        params.phi_b.fill(0.0);
        params.phi_prime_w.fill(0.0);
        params.phi_prime_b.fill(0.0);
        let inputs = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64);
        let support = arr2(&[
            [0u8, 1, 1, 1],
            [1, 0, 1, 0],
            [1, 0, 0, 0],
            [1, 1, 1, 0],
        ]);
        let cache = edge_weights(&params, &inputs, &support).unwrap();
        for i in 0..4 {
            let count = (0..4).filter(|&j| support[(i, j)] != 0).count();
            for j in 0..4 {
                if support[(i, j)] != 0 {
                    assert!((cache.a[(i, j)] - 1.0 / count as f64).abs() < 1e-15);
                } else {
                    assert_eq!(cache.a[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn edge_rows_sum_to_one_against_scalar_softmax_oracle() {
        let params = test_params(5, 1, 9);
        let graph = random_graph(10, 5, 4, 3);
        let cache = edge_weights(&params, &graph.x, &graph.support).unwrap();

        // Scalar oracle: recompute each row without max subtraction.
        let u = graph.x.dot(&params.phi_w.t()) + &params.phi_b;
        let v = graph.x.dot(&params.phi_prime_w.t()) + &params.phi_prime_b;
        for i in 0..10 {
            let mut row_sum = 0.0;
            for j in 0..10 {
                row_sum += cache.a[(i, j)];
            }
            assert!((row_sum - 1.0).abs() < 1e-12, "row {i} sums to {row_sum}");
            let mut denom = 0.0;
            for j in 0..10 {
                if graph.support[(i, j)] != 0 {
                    let mut score = 0.0;
                    for t in 0..5 {
                        score += u[(i, t)] * v[(j, t)];
                    }
                    denom += score.exp();
                }
            }
            for j in 0..10 {
                if graph.support[(i, j)] != 0 {
                    let mut score = 0.0;
                    for t in 0..5 {
                        score += u[(i, t)] * v[(j, t)];
                    }
                    let expect = score.exp() / denom;
                    assert!((cache.a[(i, j)] - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn edge_weights_survive_huge_scores() {
        let mut params = test_params(2, 1, 2);
        params.phi_w.fill(40.0);
        params.phi_prime_w.fill(40.0);
        let inputs = arr2(&[[30.0, 30.0], [29.0, 31.0], [-30.0, -30.0]]);
        let support = arr2(&[[0u8, 1, 1], [1, 0, 1], [1, 1, 0]]);
        let cache = edge_weights(&params, &inputs, &support).unwrap();
        for i in 0..3 {
            let row: f64 = cache.a.row(i).sum();
            assert!(row.is_finite());
            assert!((row - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn block_with_zero_weight_is_residual_plus_bn_shift() {
        let z = arr2(&[[1.0, -2.0], [0.5, 3.0], [2.0, 0.0]]);
        let a = arr2(&[[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]]);
        let w = Array2::zeros((2, 2));
        let mut bn = BatchNorm::identity(2);
        bn.beta = ndarray::arr1(&[0.25, -0.5]);
        let out = gcn_block(&z, &a, &w, Some((&bn, Mode::Train)));
        // ReLU(A Z 0) = 0; batch stats of zeros give xhat = 0, so the block
        // adds exactly beta.
        for i in 0..3 {
            assert!((out[(i, 0)] - (z[(i, 0)] + 0.25)).abs() < 1e-12);
            assert!((out[(i, 1)] - (z[(i, 1)] - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn block_self_loop_identity_doubles_nonnegative_input() {
        // Each node its own sole neighbor (test harness only), W = I, BN
        // disabled, Z >= 0: the block computes Z + ReLU(Z) = 2Z.
        let z = arr2(&[[1.0, 2.0], [0.0, 0.5], [3.0, 1.5]]);
        let a = Array2::eye(3);
        let w = Array2::eye(2);
        let out = gcn_block(&z, &a, &w, None);
        let expect = &z * 2.0;
        assert!(out.iter().zip(expect.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn block_matches_scalar_loop_oracle() {
        let params = test_params(4, 1, 5);
        let graph = random_graph(7, 4, 3, 8);
        let edge = edge_weights(&params, &graph.x, &graph.support).unwrap();
        let out = gcn_block(&graph.x, &edge.a, &params.gcn_w[0], Some((&params.bn[0], Mode::Train)));

        // Straight-line scalar recomputation.
        let n = 7;
        let d = 4;
        let mut h = vec![vec![0.0f64; d]; n];
        for i in 0..n {
            for c in 0..d {
                let mut agg = 0.0;
                for j in 0..n {
                    let mut zj_w = 0.0;
                    for t in 0..d {
                        zj_w += graph.x[(j, t)] * params.gcn_w[0][(t, c)];
                    }
                    agg += edge.a[(i, j)] * zj_w;
                }
                h[i][c] = agg.max(0.0);
            }
        }
        for c in 0..d {
            let mean: f64 = (0..n).map(|i| h[i][c]).sum::<f64>() / n as f64;
            let var: f64 = (0..n).map(|i| (h[i][c] - mean).powi(2)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + BN_EPS).sqrt();
            for (i, row) in h.iter_mut().enumerate() {
                let xhat = (row[c] - mean) * inv;
                let expect = graph.x[(i, c)] + params.bn[0].gamma[c] * xhat + params.bn[0].beta[c];
                assert!(
                    (out[(i, c)] - expect).abs() < 1e-10,
                    "node {i} channel {c}: {} vs {expect}",
                    out[(i, c)]
                );
            }
        }
    }

    #[test]
    fn forward_single_node_graph_uses_residual_path() {
        let params = test_params(4, 3, 11);
        let make = |value: f64| {
            let x = Array2::from_elem((1, 4), value);
            ContextGraph {
                probe_id: 0,
                candidate_ids: vec![1],
                x: x.clone(),
                gallery: x,
                support: Array2::zeros((1, 1)),
                labels: Some(vec![true]),
            }
        };
        let a = forward_eval(&params, &make(0.3)).unwrap();
        let b = forward_eval(&params, &make(0.3)).unwrap();
        let c = forward_eval(&params, &make(-0.7)).unwrap();
        assert_eq!(a[0], b[0]);
        assert_ne!(a[0], c[0]);
    }

    #[test]
    fn duplicate_nodes_get_identical_logits() {
        let params = test_params(3, 2, 13);
        // Nodes 0 and 1 share features and support rows pointing at node 2.
        let x = arr2(&[[0.4, -0.2, 0.9], [0.4, -0.2, 0.9], [1.0, 0.0, -1.0]]);
        let support = arr2(&[[0u8, 0, 1], [0, 0, 1], [1, 0, 0]]);
        let graph = ContextGraph {
            probe_id: 0,
            candidate_ids: vec![1, 2, 3],
            x: x.clone(),
            gallery: x,
            support,
            labels: None,
        };
        let cache = forward_batch(&params, &[&graph], Mode::Train).unwrap();
        assert!((cache.logits[0] - cache.logits[1]).abs() < 1e-12);
    }

    #[test]
    fn forward_is_permutation_equivariant() {
        let params = test_params(5, 3, 17);
        let graph = random_graph(9, 5, 3, 21);
        let cache = forward_batch(&params, &[&graph], Mode::Train).unwrap();

        // Permute nodes by rotation.
        let n = 9;
        let perm: Vec<usize> = (0..n).map(|i| (i + 4) % n).collect();
        let mut x = Array2::zeros((n, 5));
        let mut gallery = Array2::zeros((n, 5));
        let mut support = Array2::zeros((n, n));
        for i in 0..n {
            for c in 0..5 {
                x[(perm[i], c)] = graph.x[(i, c)];
                gallery[(perm[i], c)] = graph.gallery[(i, c)];
            }
            for j in 0..n {
                support[(perm[i], perm[j])] = graph.support[(i, j)];
            }
        }
        let permuted = ContextGraph {
            probe_id: 0,
            candidate_ids: graph.candidate_ids.clone(),
            x,
            gallery,
            support,
            labels: None,
        };
        let permuted_cache = forward_batch(&params, &[&permuted], Mode::Train).unwrap();
        for i in 0..n {
            assert!(
                (cache.logits[i] - permuted_cache.logits[perm[i]]).abs() < 1e-10,
                "node {i}"
            );
        }
    }

    #[test]
    fn zero_layers_reduce_to_mlp_on_duplicated_input() {
        let params = test_params(4, 0, 19);
        let graph = random_graph(6, 4, 2, 23);
        let cache = forward_batch(&params, &[&graph], Mode::Train).unwrap();

        // Manual MLP on [X | X].
        let mut concat = Array2::zeros((6, 8));
        concat.slice_mut(s![.., 0..4]).assign(&graph.x);
        concat.slice_mut(s![.., 4..8]).assign(&graph.x);
        let u1 = (concat.dot(&params.mlp1_w.t()) + &params.mlp1_b).mapv(|x| x.max(0.0));
        let u2 = (u1.dot(&params.mlp2_w.t()) + &params.mlp2_b).mapv(|x| x.max(0.0));
        let logits = u2.dot(&params.mlp3_w) + params.mlp3_b;
        for i in 0..6 {
            assert!((cache.logits[i] - logits[i]).abs() < 1e-12);
        }

        // The graph structure is ignored: rewiring support changes nothing.
        let mut rewired = graph.clone();
        rewired.support = Array2::zeros((6, 6));
        let rewired_cache = forward_batch(&params, &[&rewired], Mode::Train).unwrap();
        assert_eq!(cache.logits, rewired_cache.logits);
    }

    #[test]
    fn eval_mode_is_independent_of_batch_composition() {
        let params = test_params(4, 2, 29);
        let g1 = random_graph(5, 4, 2, 31);
        let g2 = random_graph(8, 4, 3, 37);
        let solo = forward_batch(&params, &[&g1], Mode::Eval).unwrap();
        let joint = forward_batch(&params, &[&g2, &g1], Mode::Eval).unwrap();
        let joint_g1 = joint.graph_logits(1);
        for i in 0..5 {
            assert_eq!(solo.logits[i], joint_g1[i]);
        }
    }

    #[test]
    fn train_mode_couples_batch_statistics() {
        let params = test_params(4, 2, 41);
        let g1 = random_graph(5, 4, 2, 43);
        let g2 = random_graph(8, 4, 3, 47);
        let solo = forward_batch(&params, &[&g1], Mode::Train).unwrap();
        let joint = forward_batch(&params, &[&g2, &g1], Mode::Train).unwrap();
        let joint_g1 = joint.graph_logits(1);
        let differs = (0..5).any(|i| (solo.logits[i] - joint_g1[i]).abs() > 1e-9);
        assert!(differs, "batch statistics should couple training graphs");
    }

    #[test]
    fn running_stats_update_uses_unbiased_variance() {
        let mut params = test_params(3, 1, 53);
        let graph = random_graph(6, 3, 2, 59);
        let cache = forward_batch(&params, &[&graph], Mode::Train).unwrap();
        let before = params.bn[0].clone();
        update_running_stats(&mut params, &cache);
        let n = 6.0;
        for c in 0..3 {
            let expect_mean = 0.9 * before.running_mean[c] + 0.1 * cache.layers[0].batch_mean[c];
            let expect_var = 0.9 * before.running_var[c]
                + 0.1 * cache.layers[0].batch_var[c] * n / (n - 1.0);
            assert!((params.bn[0].running_mean[c] - expect_mean).abs() < 1e-15);
            assert!((params.bn[0].running_var[c] - expect_var).abs() < 1e-15);
        }
    }
}
