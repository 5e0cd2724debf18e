//! Versioned binary checkpoints.
//!
//! Layout: magic `RGCK`, u32 version, u32 dim, u32 edge_dim, u32 layers,
//! u32 hidden, u8 flags (bit 0: optimizer state appended, bit 1: edge inputs
//! are gallery features), then every parameter tensor in declaration order as
//! little-endian f64, then (if flagged) the momentum buffers in trainable
//! block order. Run metadata lives in a JSON sidecar next to the binary.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::EdgeInput;

use super::{ModelConfig, ModelGrads, ModelParams};

const MAGIC: &[u8; 4] = b"RGCK";
const VERSION: u32 = 1;

fn push_tensor(out: &mut Vec<f64>, values: &[f64]) {
    out.extend_from_slice(values);
}

/// Every parameter tensor, including running statistics, declaration order.
fn all_tensors(params: &ModelParams) -> Vec<f64> {
    let mut out = Vec::new();
    push_tensor(&mut out, params.phi_w.as_slice().unwrap());
    push_tensor(&mut out, params.phi_b.as_slice().unwrap());
    push_tensor(&mut out, params.phi_prime_w.as_slice().unwrap());
    push_tensor(&mut out, params.phi_prime_b.as_slice().unwrap());
    for w in &params.gcn_w {
        push_tensor(&mut out, w.as_slice().unwrap());
    }
    for bn in &params.bn {
        push_tensor(&mut out, bn.gamma.as_slice().unwrap());
        push_tensor(&mut out, bn.beta.as_slice().unwrap());
        push_tensor(&mut out, bn.running_mean.as_slice().unwrap());
        push_tensor(&mut out, bn.running_var.as_slice().unwrap());
    }
    push_tensor(&mut out, params.mlp1_w.as_slice().unwrap());
    push_tensor(&mut out, params.mlp1_b.as_slice().unwrap());
    push_tensor(&mut out, params.mlp2_w.as_slice().unwrap());
    push_tensor(&mut out, params.mlp2_b.as_slice().unwrap());
    push_tensor(&mut out, params.mlp3_w.as_slice().unwrap());
    out.push(params.mlp3_b);
    out
}

fn fill_tensors(params: &mut ModelParams, values: &[f64]) -> Result<()> {
    let mut cursor = 0usize;
    let mut take = |slice: &mut [f64]| -> Result<()> {
        let end = cursor + slice.len();
        if end > values.len() {
            return Err(Error::Checkpoint("parameter payload too short".into()));
        }
        slice.copy_from_slice(&values[cursor..end]);
        cursor = end;
        Ok(())
    };
    take(params.phi_w.as_slice_mut().unwrap())?;
    take(params.phi_b.as_slice_mut().unwrap())?;
    take(params.phi_prime_w.as_slice_mut().unwrap())?;
    take(params.phi_prime_b.as_slice_mut().unwrap())?;
    for w in &mut params.gcn_w {
        take(w.as_slice_mut().unwrap())?;
    }
    for bn in &mut params.bn {
        take(bn.gamma.as_slice_mut().unwrap())?;
        take(bn.beta.as_slice_mut().unwrap())?;
        take(bn.running_mean.as_slice_mut().unwrap())?;
        take(bn.running_var.as_slice_mut().unwrap())?;
    }
    take(params.mlp1_w.as_slice_mut().unwrap())?;
    take(params.mlp1_b.as_slice_mut().unwrap())?;
    take(params.mlp2_w.as_slice_mut().unwrap())?;
    take(params.mlp2_b.as_slice_mut().unwrap())?;
    take(params.mlp3_w.as_slice_mut().unwrap())?;
    take(std::slice::from_mut(&mut params.mlp3_b))?;
    if cursor != values.len() {
        return Err(Error::Checkpoint(format!(
            "parameter payload holds {} extra values",
            values.len() - cursor
        )));
    }
    Ok(())
}

/// Write a checkpoint; `velocity` appends optimizer state for exact resume.
pub fn save(path: &Path, params: &ModelParams, velocity: Option<&ModelGrads>) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.cfg.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(params.cfg.edge_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(params.cfg.layers as u32).to_le_bytes());
    buf.extend_from_slice(&(params.cfg.hidden as u32).to_le_bytes());
    let mut flags = 0u8;
    if velocity.is_some() {
        flags |= 1;
    }
    if params.cfg.edge_input == EdgeInput::Gallery {
        flags |= 2;
    }
    buf.push(flags);
    for v in all_tensors(params) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(vel) = velocity {
        for (_, block) in vel.blocks() {
            for v in block {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read a checkpoint back. Returns the optimizer state when present.
pub fn load(path: &Path) -> Result<(ModelParams, Option<ModelGrads>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 25 || &bytes[0..4] != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{} is not a checkpoint file",
            path.display()
        )));
    }
    let u32_at = |offset: usize| {
        u32::from_le_bytes([
            bytes[offset],
            bytes[offset + 1],
            bytes[offset + 2],
            bytes[offset + 3],
        ]) as usize
    };
    let version = u32_at(4);
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let cfg = ModelConfig {
        dim: u32_at(8),
        edge_dim: u32_at(12),
        layers: u32_at(16),
        hidden: u32_at(20),
        edge_input: if bytes[24] & 2 != 0 {
            EdgeInput::Gallery
        } else {
            EdgeInput::Nodes
        },
    };
    cfg.validate()
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let has_velocity = bytes[24] & 1 != 0;

    let payload = &bytes[25..];
    if payload.len() % 8 != 0 {
        return Err(Error::Checkpoint("truncated parameter payload".into()));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint(
            "checkpoint holds non-finite parameters".into(),
        ));
    }

    let mut params = ModelParams::init(cfg, 0)?;
    let param_count = all_tensors(&params).len();
    if has_velocity {
        let mut velocity = ModelGrads::zeros(&cfg);
        let velocity_count: usize = velocity.blocks().iter().map(|(_, b)| b.len()).sum();
        if values.len() != param_count + velocity_count {
            return Err(Error::Checkpoint(format!(
                "expected {} values, found {}",
                param_count + velocity_count,
                values.len()
            )));
        }
        fill_tensors(&mut params, &values[..param_count])?;
        let mut cursor = param_count;
        for (_, block) in velocity.blocks_mut() {
            block.copy_from_slice(&values[cursor..cursor + block.len()]);
            cursor += block.len();
        }
        Ok((params, Some(velocity)))
    } else {
        if values.len() != param_count {
            return Err(Error::Checkpoint(format!(
                "expected {param_count} values, found {}",
                values.len()
            )));
        }
        fill_tensors(&mut params, &values)?;
        Ok((params, None))
    }
}
