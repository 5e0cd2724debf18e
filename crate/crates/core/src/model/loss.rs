//! Focal loss for per-node binary classification.
//!
//! Per node: -alpha * (1 - p_t)^gamma * log(p_t), where p_t is the predicted
//! probability of the true label. Computed through softplus/sigmoid identities
//! so large logits neither overflow nor produce log(0).

use ndarray::Array1;

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss of one node.
pub fn focal_term(logit: f64, label: bool, alpha: f64, gamma: f64) -> f64 {
    let sign = if label { 1.0 } else { -1.0 };
    let margin = sign * logit;
    let one_minus_pt = sigmoid(-margin);
    // -log(p_t) = softplus(-margin)
    alpha * one_minus_pt.powf(gamma) * softplus(-margin)
}

/// d(loss)/d(logit) of one node.
pub fn focal_term_grad(logit: f64, label: bool, alpha: f64, gamma: f64) -> f64 {
    let sign = if label { 1.0 } else { -1.0 };
    let margin = sign * logit;
    let pt = sigmoid(margin);
    let one_minus_pt = sigmoid(-margin);
    let log_pt = -softplus(-margin);
    sign * alpha * one_minus_pt.powf(gamma) * (gamma * pt * log_pt - one_minus_pt)
}

/// Mean focal loss over the nodes of one graph.
pub fn focal_loss(logits: &Array1<f64>, labels: &[bool], alpha: f64, gamma: f64) -> f64 {
    assert_eq!(logits.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&z, &t)| focal_term(z, t, alpha, gamma))
        .sum();
    total / labels.len() as f64
}

/// Weighted focal loss and its logit gradient for a stacked batch.
///
/// `weights[i]` is the contribution of node i to the total (for a batch of
/// graphs averaged per graph then over graphs, 1 / (graphs * nodes-in-graph)).
pub fn focal_loss_weighted(
    logits: &Array1<f64>,
    labels: &[bool],
    weights: &[f64],
    alpha: f64,
    gamma: f64,
) -> (f64, Array1<f64>) {
    assert_eq!(logits.len(), labels.len());
    assert_eq!(logits.len(), weights.len());
    let mut loss = 0.0;
    let mut grad = Array1::zeros(logits.len());
    for i in 0..logits.len() {
        loss += weights[i] * focal_term(logits[i], labels[i], alpha, gamma);
        grad[i] = weights[i] * focal_term_grad(logits[i], labels[i], alpha, gamma);
    }
    (loss, grad)
}
