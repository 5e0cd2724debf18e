//! The trainable model: learnable edge weighting, stacked residual GCN
//! blocks, input concatenation, and a 3-layer MLP head, together with focal
//! loss, exact reverse-mode gradients, and the SGD optimizer.

pub mod backward;
pub mod checkpoint;
pub mod forward;
pub mod gradcheck;
pub mod loss;
pub mod optim;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeInput;
use crate::seed;

pub use backward::backward;
pub use forward::{edge_weights, forward_batch, forward_eval, gcn_block, ForwardCache, Mode};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::{focal_loss, focal_loss_weighted};
pub use optim::{sgd_step, SgdConfig};

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Feature dimension d of the embedding store.
    pub dim: usize,
    /// Output dimension of the edge transforms; defaults to `dim`.
    pub edge_dim: usize,
    /// Number of residual GCN blocks.
    pub layers: usize,
    /// MLP hidden width; defaults to `2 * dim`.
    pub hidden: usize,
    pub edge_input: EdgeInput,
}

impl ModelConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            edge_dim: dim,
            layers: 9,
            hidden: 2 * dim,
            edge_input: EdgeInput::Nodes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.edge_dim == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "model dimensions must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-block batchnorm state. Scale and shift are trainable; the running
/// statistics are updated by the trainer and consumed in eval mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn identity(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
        }
    }
}

/// All model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub cfg: ModelConfig,
    /// Edge transform for the source node of a directed edge.
    pub phi_w: Array2<f64>,
    pub phi_b: Array1<f64>,
    /// Edge transform for the target node.
    pub phi_prime_w: Array2<f64>,
    pub phi_prime_b: Array1<f64>,
    pub gcn_w: Vec<Array2<f64>>,
    pub bn: Vec<BatchNorm>,
    pub mlp1_w: Array2<f64>,
    pub mlp1_b: Array1<f64>,
    pub mlp2_w: Array2<f64>,
    pub mlp2_b: Array1<f64>,
    pub mlp3_w: Array1<f64>,
    pub mlp3_b: f64,
}

fn uniform_fan_in<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

fn uniform_bias<R: Rng>(rng: &mut R, len: usize, fan_in: usize) -> Array1<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array1::from_shape_fn(len, |_| rng.random_range(-bound..bound))
}

impl ModelParams {
    /// Symmetric uniform fan-in initialization; batchnorm starts as identity.
    pub fn init(cfg: ModelConfig, root_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seed::rng(root_seed, "init");
        let d = cfg.dim;
        let de = cfg.edge_dim;
        let h = cfg.hidden;
        Ok(Self {
            cfg,
            phi_w: uniform_fan_in(&mut rng, de, d, d),
            phi_b: uniform_bias(&mut rng, de, d),
            phi_prime_w: uniform_fan_in(&mut rng, de, d, d),
            phi_prime_b: uniform_bias(&mut rng, de, d),
            gcn_w: (0..cfg.layers)
                .map(|_| uniform_fan_in(&mut rng, d, d, d))
                .collect(),
            bn: (0..cfg.layers).map(|_| BatchNorm::identity(d)).collect(),
            mlp1_w: uniform_fan_in(&mut rng, h, 2 * d, 2 * d),
            mlp1_b: uniform_bias(&mut rng, h, 2 * d),
            mlp2_w: uniform_fan_in(&mut rng, h, h, h),
            mlp2_b: uniform_bias(&mut rng, h, h),
            mlp3_w: uniform_bias(&mut rng, h, h),
            mlp3_b: {
                let bound = 1.0 / (h as f64).sqrt();
                rng.random_range(-bound..bound)
            },
        })
    }

    /// Trainable blocks in declaration order: (name, values). Running
    /// batchnorm statistics are not trainable and do not appear.
    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("phi_w".into(), self.phi_w.as_slice_mut().unwrap()),
            ("phi_b".into(), self.phi_b.as_slice_mut().unwrap()),
            (
                "phi_prime_w".into(),
                self.phi_prime_w.as_slice_mut().unwrap(),
            ),
            (
                "phi_prime_b".into(),
                self.phi_prime_b.as_slice_mut().unwrap(),
            ),
        ];
        for (l, w) in self.gcn_w.iter_mut().enumerate() {
            out.push((format!("gcn_w[{l}]"), w.as_slice_mut().unwrap()));
        }
        for (l, bn) in self.bn.iter_mut().enumerate() {
            out.push((format!("bn[{l}].gamma"), bn.gamma.as_slice_mut().unwrap()));
            out.push((format!("bn[{l}].beta"), bn.beta.as_slice_mut().unwrap()));
        }
        out.push(("mlp1_w".into(), self.mlp1_w.as_slice_mut().unwrap()));
        out.push(("mlp1_b".into(), self.mlp1_b.as_slice_mut().unwrap()));
        out.push(("mlp2_w".into(), self.mlp2_w.as_slice_mut().unwrap()));
        out.push(("mlp2_b".into(), self.mlp2_b.as_slice_mut().unwrap()));
        out.push(("mlp3_w".into(), self.mlp3_w.as_slice_mut().unwrap()));
        out.push(("mlp3_b".into(), std::slice::from_mut(&mut self.mlp3_b)));
        out
    }

    pub fn block_names(&self) -> Vec<String> {
        let mut names = vec![
            "phi_w".to_string(),
            "phi_b".to_string(),
            "phi_prime_w".to_string(),
            "phi_prime_b".to_string(),
        ];
        for l in 0..self.gcn_w.len() {
            names.push(format!("gcn_w[{l}]"));
        }
        for l in 0..self.bn.len() {
            names.push(format!("bn[{l}].gamma"));
            names.push(format!("bn[{l}].beta"));
        }
        for tail in ["mlp1_w", "mlp1_b", "mlp2_w", "mlp2_b", "mlp3_w", "mlp3_b"] {
            names.push(tail.to_string());
        }
        names
    }
}

/// Gradients (or any parameter-shaped buffer, e.g. momentum) for every
/// trainable block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub phi_w: Array2<f64>,
    pub phi_b: Array1<f64>,
    pub phi_prime_w: Array2<f64>,
    pub phi_prime_b: Array1<f64>,
    pub gcn_w: Vec<Array2<f64>>,
    pub bn_gamma: Vec<Array1<f64>>,
    pub bn_beta: Vec<Array1<f64>>,
    pub mlp1_w: Array2<f64>,
    pub mlp1_b: Array1<f64>,
    pub mlp2_w: Array2<f64>,
    pub mlp2_b: Array1<f64>,
    pub mlp3_w: Array1<f64>,
    pub mlp3_b: f64,
}

impl ModelGrads {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.dim;
        let de = cfg.edge_dim;
        let h = cfg.hidden;
        Self {
            phi_w: Array2::zeros((de, d)),
            phi_b: Array1::zeros(de),
            phi_prime_w: Array2::zeros((de, d)),
            phi_prime_b: Array1::zeros(de),
            gcn_w: (0..cfg.layers).map(|_| Array2::zeros((d, d))).collect(),
            bn_gamma: (0..cfg.layers).map(|_| Array1::zeros(d)).collect(),
            bn_beta: (0..cfg.layers).map(|_| Array1::zeros(d)).collect(),
            mlp1_w: Array2::zeros((h, 2 * d)),
            mlp1_b: Array1::zeros(h),
            mlp2_w: Array2::zeros((h, h)),
            mlp2_b: Array1::zeros(h),
            mlp3_w: Array1::zeros(h),
            mlp3_b: 0.0,
        }
    }

    /// Blocks in the same order as [`ModelParams::blocks_mut`].
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("phi_w".into(), self.phi_w.as_slice().unwrap()),
            ("phi_b".into(), self.phi_b.as_slice().unwrap()),
            ("phi_prime_w".into(), self.phi_prime_w.as_slice().unwrap()),
            ("phi_prime_b".into(), self.phi_prime_b.as_slice().unwrap()),
        ];
        for (l, w) in self.gcn_w.iter().enumerate() {
            out.push((format!("gcn_w[{l}]"), w.as_slice().unwrap()));
        }
        for l in 0..self.bn_gamma.len() {
            out.push((format!("bn[{l}].gamma"), self.bn_gamma[l].as_slice().unwrap()));
            out.push((format!("bn[{l}].beta"), self.bn_beta[l].as_slice().unwrap()));
        }
        out.push(("mlp1_w".into(), self.mlp1_w.as_slice().unwrap()));
        out.push(("mlp1_b".into(), self.mlp1_b.as_slice().unwrap()));
        out.push(("mlp2_w".into(), self.mlp2_w.as_slice().unwrap()));
        out.push(("mlp2_b".into(), self.mlp2_b.as_slice().unwrap()));
        out.push(("mlp3_w".into(), self.mlp3_w.as_slice().unwrap()));
        out.push(("mlp3_b".into(), std::slice::from_ref(&self.mlp3_b)));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("phi_w".into(), self.phi_w.as_slice_mut().unwrap()),
            ("phi_b".into(), self.phi_b.as_slice_mut().unwrap()),
            (
                "phi_prime_w".into(),
                self.phi_prime_w.as_slice_mut().unwrap(),
            ),
            (
                "phi_prime_b".into(),
                self.phi_prime_b.as_slice_mut().unwrap(),
            ),
        ];
        for (l, w) in self.gcn_w.iter_mut().enumerate() {
            out.push((format!("gcn_w[{l}]"), w.as_slice_mut().unwrap()));
        }
        for (l, (g, b)) in self
            .bn_gamma
            .iter_mut()
            .zip(self.bn_beta.iter_mut())
            .enumerate()
        {
            out.push((format!("bn[{l}].gamma"), g.as_slice_mut().unwrap()));
            out.push((format!("bn[{l}].beta"), b.as_slice_mut().unwrap()));
        }
        out.push(("mlp1_w".into(), self.mlp1_w.as_slice_mut().unwrap()));
        out.push(("mlp1_b".into(), self.mlp1_b.as_slice_mut().unwrap()));
        out.push(("mlp2_w".into(), self.mlp2_w.as_slice_mut().unwrap()));
        out.push(("mlp2_b".into(), self.mlp2_b.as_slice_mut().unwrap()));
        out.push(("mlp3_w".into(), self.mlp3_w.as_slice_mut().unwrap()));
        out.push(("mlp3_b".into(), std::slice::from_mut(&mut self.mlp3_b)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_shaped() {
        let cfg = ModelConfig::new(6);
        let a = ModelParams::init(cfg, 7).unwrap();
        let b = ModelParams::init(cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.phi_w.dim(), (6, 6));
        assert_eq!(a.gcn_w.len(), 9);
        assert_eq!(a.mlp1_w.dim(), (12, 12));
        assert_ne!(ModelParams::init(cfg, 8).unwrap(), a);
    }

    #[test]
    fn block_orders_agree() {
        let cfg = ModelConfig {
            layers: 3,
            ..ModelConfig::new(4)
        };
        let mut params = ModelParams::init(cfg, 1).unwrap();
        let names = params.block_names();
        let param_names: Vec<String> = params.blocks_mut().into_iter().map(|(n, _)| n).collect();
        let mut grads = ModelGrads::zeros(&cfg);
        let grad_names: Vec<String> = grads.blocks().into_iter().map(|(n, _)| n).collect();
        let grad_names_mut: Vec<String> =
            grads.blocks_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, param_names);
        assert_eq!(names, grad_names);
        assert_eq!(names, grad_names_mut);
    }

    #[test]
    fn blocks_match_grads_in_shape() {
        let cfg = ModelConfig {
            layers: 2,
            ..ModelConfig::new(5)
        };
        let mut params = ModelParams::init(cfg, 3).unwrap();
        let grads = ModelGrads::zeros(&cfg);
        for ((pn, p), (gn, g)) in params.blocks_mut().iter().zip(grads.blocks().iter()) {
            assert_eq!(pn, gn);
            assert_eq!(p.len(), g.len(), "block {pn}");
        }
    }
}
