//! Exact reverse-mode gradients for every trainable parameter, including the
//! path through the edge softmax into the two edge transforms.
//!
//! Mirrors the forward pass step for step over the cached intermediates; the
//! adjacency gradient accumulates across layers before the softmax and
//! bilinear-form backward run once per graph.

use ndarray::{s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::ContextGraph;

use super::forward::{ForwardCache, Mode};
use super::{ModelGrads, ModelParams};

/// Backward through the whole architecture given d(loss)/d(logits).
pub fn backward(
    params: &ModelParams,
    graphs: &[&ContextGraph],
    cache: &ForwardCache,
    dlogits: &Array1<f64>,
) -> Result<ModelGrads> {
    if cache.mode != Mode::Train {
        return Err(Error::Numeric(
            "backward requires a train-mode forward cache".into(),
        ));
    }
    if dlogits.len() != cache.node_count() {
        return Err(Error::Numeric(format!(
            "gradient length {} does not match {} nodes",
            dlogits.len(),
            cache.node_count()
        )));
    }
    let cfg = &params.cfg;
    let d = cfg.dim;
    let n = cache.node_count();
    let mut grads = ModelGrads::zeros(cfg);

    // MLP head: logits = relu(relu(C W1^T + b1) W2^T + b2) . w3 + b3
    grads.mlp3_b = dlogits.sum();
    grads.mlp3_w = cache.mlp2_out.t().dot(dlogits);
    let mut d_mlp2_out = Array2::zeros((n, cfg.hidden));
    for i in 0..n {
        for j in 0..cfg.hidden {
            d_mlp2_out[(i, j)] = dlogits[i] * params.mlp3_w[j];
        }
    }
    let d_mlp2_pre = relu_backward(&d_mlp2_out, &cache.mlp2_pre);
    grads.mlp2_w = d_mlp2_pre.t().dot(&cache.mlp1_out);
    grads.mlp2_b = d_mlp2_pre.sum_axis(Axis(0));
    let d_mlp1_out = d_mlp2_pre.dot(&params.mlp2_w);
    let d_mlp1_pre = relu_backward(&d_mlp1_out, &cache.mlp1_pre);
    grads.mlp1_w = d_mlp1_pre.t().dot(&cache.concat);
    grads.mlp1_b = d_mlp1_pre.sum_axis(Axis(0));
    let d_concat = d_mlp1_pre.dot(&params.mlp1_w);

    // Split the concatenation: left half feeds Z_0 directly (input, no
    // parameter gradient), right half flows back through the blocks.
    let mut dz = d_concat.slice(s![.., d..2 * d]).to_owned();

    // Adjacency gradient per graph, accumulated over layers.
    let mut d_adjacency: Vec<Array2<f64>> = graphs
        .iter()
        .map(|g| Array2::zeros((g.node_count(), g.node_count())))
        .collect();

    for l in (0..cfg.layers).rev() {
        let layer = &cache.layers[l];
        // Z_{l+1} = Z_l + BN(ReLU((A Z_l) W_l)); dz is d/d(Z_{l+1}).
        let d_block_out = dz.clone();

        // Batchnorm backward over the stacked node axis.
        let mut d_activated = Array2::zeros((n, d));
        for c in 0..d {
            let dy = d_block_out.column(c);
            let xhat = layer.xhat.column(c);
            let dy_sum: f64 = dy.sum();
            let dyxhat_sum: f64 = dy.iter().zip(xhat.iter()).map(|(a, b)| a * b).sum();
            grads.bn_beta[l][c] += dy_sum;
            grads.bn_gamma[l][c] += dyxhat_sum;
            let scale = params.bn[l].gamma[c] * layer.inv_std[c];
            let inv_n = 1.0 / n as f64;
            for i in 0..n {
                d_activated[(i, c)] =
                    scale * (dy[i] - inv_n * dy_sum - xhat[i] * inv_n * dyxhat_sum);
            }
        }

        let d_pre = relu_backward(&d_activated, &layer.pre_activation);
        // pre = aggregated . W
        grads.gcn_w[l] += &layer.aggregated.t().dot(&d_pre);
        let d_aggregated = d_pre.dot(&params.gcn_w[l].t());

        // aggregated_g = A_g Z_g
        let z_l = &cache.z[l];
        for (g, edge) in cache.edges.iter().enumerate() {
            let rows = s![cache.offsets[g]..cache.offsets[g + 1], ..];
            let d_agg_g = d_aggregated.slice(rows);
            let z_g = z_l.slice(rows);
            d_adjacency[g] += &d_agg_g.dot(&z_g.t());
            let dz_g = edge.a.t().dot(&d_agg_g);
            dz.slice_mut(rows).zip_mut_with(&dz_g, |a, b| *a += b);
        }
        // The residual path contributes dz unchanged, already in place.
    }

    // Softmax rows, then the bilinear form into the edge transforms.
    for (g, graph) in graphs.iter().enumerate() {
        let edge = &cache.edges[g];
        let ng = graph.node_count();
        let da = &d_adjacency[g];
        let mut d_scores = Array2::zeros((ng, ng));
        for i in 0..ng {
            let mut weighted: f64 = 0.0;
            for j in 0..ng {
                weighted += da[(i, j)] * edge.a[(i, j)];
            }
            for j in 0..ng {
                if graph.support[(i, j)] != 0 {
                    d_scores[(i, j)] = edge.a[(i, j)] * (da[(i, j)] - weighted);
                }
            }
        }
        // scores = U V^T with U = E phi^T + b, V = E phi'^T + b'.
        let du = d_scores.dot(&edge.v);
        let dv = d_scores.t().dot(&edge.u);
        let inputs = graph.edge_inputs(cfg.edge_input);
        grads.phi_w += &du.t().dot(inputs);
        grads.phi_b += &du.sum_axis(Axis(0));
        grads.phi_prime_w += &dv.t().dot(inputs);
        grads.phi_prime_b += &dv.sum_axis(Axis(0));
    }

    Ok(grads)
}

fn relu_backward(upstream: &Array2<f64>, pre_activation: &Array2<f64>) -> Array2<f64> {
    let mut out = upstream.clone();
    out.zip_mut_with(pre_activation, |g, &pre| {
        if pre <= 0.0 {
            *g = 0.0;
        }
    });
    out
}
