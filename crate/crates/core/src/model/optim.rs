//! SGD with classic momentum and L2 weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ModelGrads, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

/// One update: v <- momentum v + grad + weight_decay theta; theta <- theta - lr v.
///
/// Batchnorm running statistics are not trainable blocks and are never
/// touched here, keeping them exempt from weight decay.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &ModelGrads,
    velocity: &mut ModelGrads,
    cfg: &SgdConfig,
) -> Result<()> {
    for (name, g) in grads.blocks() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { block: name });
        }
    }
    for (((_, theta), (_, g)), (_, v)) in params
        .blocks_mut()
        .into_iter()
        .zip(grads.blocks())
        .zip(velocity.blocks_mut())
    {
        for i in 0..theta.len() {
            v[i] = cfg.momentum * v[i] + g[i] + cfg.weight_decay * theta[i];
            theta[i] -= cfg.lr * v[i];
        }
    }
    Ok(())
}
