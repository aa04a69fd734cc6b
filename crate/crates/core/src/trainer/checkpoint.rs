//! Checkpoint file: every parameter, library, projection and optimizer
//! moment as little-endian f64, behind a manifest of named shapes.
//!
//! ```text
//! "MRAM" | version u32 | config_len u32 | config JSON | step u64
//! | n_tensors u32 | n × (name_len u16 | name | ndim u32 | ndim × u64)
//! | concatenated f64 data in manifest order
//! ```

use std::collections::HashMap;
use std::path::Path;

use crate::data::ByteReader;
use crate::error::{MoeError, Result};
use crate::experts::{ExpertParams, TENSOR_NAMES};
use crate::frl::{FeatureRetrievalLibrary, PrototypeEntry, Projection};
use crate::router::LinearGate;

use super::adam::AdamMoments;
use super::{TrainConfig, TrainState};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MRAM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

fn tensor(name: String, shape: Vec<usize>, data: Vec<f64>) -> Tensor {
    Tensor { name, shape, data }
}

fn param_names(state: &TrainState) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for (j, e) in state.experts.iter().enumerate() {
        for (name, shape) in TENSOR_NAMES.iter().zip(e.shapes()) {
            out.push((format!("expert.{j}.{name}"), shape));
        }
    }
    if let Some(g) = &state.gate {
        out.push(("gate.weights".into(), vec![g.n_experts, g.dim]));
        out.push(("gate.biases".into(), vec![g.n_experts]));
    }
    out
}

/// All tensors of a state, in file order.
pub fn state_tensors(state: &TrainState) -> Vec<Tensor> {
    let params = param_names(state);
    let mut out: Vec<Tensor> = params
        .iter()
        .zip(state.param_tensors())
        .map(|((name, shape), data)| tensor(name.clone(), shape.clone(), data.to_vec()))
        .collect();
    for (j, lib) in state.libraries.iter().enumerate() {
        let data = lib.entries().iter().flat_map(|e| e.prototype.iter().copied()).collect();
        out.push(tensor(format!("frl.{j}.prototypes"), vec![lib.len(), lib.dim()], data));
        out.push(tensor(format!("frl.{j}.importance"), vec![lib.len()], lib.entries().iter().map(|e| e.importance).collect()));
    }
    for (j, p) in state.projections.iter().enumerate() {
        out.push(tensor(format!("projection.{j}"), vec![p.out_dim(), p.in_dim()], p.matrix().to_vec()));
    }
    for (kind, buffers) in [("m", &state.moments.m), ("v", &state.moments.v)] {
        for ((name, shape), data) in params.iter().zip(buffers) {
            out.push(tensor(format!("adam.{kind}.{name}"), shape.clone(), data.clone()));
        }
    }
    out
}

pub fn checkpoint_bytes(state: &TrainState, config: &TrainConfig) -> Result<Vec<u8>> {
    let config_json = serde_json::to_vec(config).map_err(|e| MoeError::InvalidInput(format!("config echo: {e}")))?;
    let tensors = state_tensors(state);
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&config_json);
    out.extend_from_slice(&state.step.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for t in &tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(path: impl AsRef<Path>, state: &TrainState, config: &TrainConfig) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(state, config)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(TrainConfig, TrainState)> {
    parse_checkpoint(&std::fs::read(path)?)
}

/// Reads the raw header and tensors without rebuilding a state.
pub fn read_tensors(bytes: &[u8]) -> Result<(TrainConfig, u64, Vec<Tensor>)> {
    let mut r = ByteReader::new(bytes);
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(MoeError::Format { offset: 0, message: "bad magic, expected \"MRAM\"".into() });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(MoeError::Format { offset: 4, message: format!("unsupported checkpoint version {version}") });
    }
    let len = r.u32("config length")? as usize;
    let at = r.offset();
    let config: TrainConfig = serde_json::from_slice(r.take(len, "config")?)
        .map_err(|e| MoeError::Format { offset: at, message: format!("config echo: {e}") })?;
    let step = r.u64("step")?;
    let count = r.u32("tensor count")? as usize;
    let mut manifest = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let at = r.offset();
        let name_len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| MoeError::Format { offset: at, message: "tensor name is not UTF-8".into() })?
            .to_string();
        let ndim = r.u32("rank")? as usize;
        let shape = (0..ndim).map(|_| r.u64("dimension").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        manifest.push((name, shape));
    }
    let mut tensors = Vec::with_capacity(manifest.len());
    for (name, shape) in manifest {
        let n: usize = shape.iter().product();
        if r.remaining() < n.saturating_mul(8) {
            return Err(MoeError::Format { offset: r.offset(), message: format!("truncated in tensor {name}") });
        }
        let data = (0..n).map(|_| r.f64("tensor data")).collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor { name, shape, data });
    }
    if r.remaining() != 0 {
        return Err(MoeError::Format { offset: r.offset(), message: format!("{} trailing bytes", r.remaining()) });
    }
    Ok((config, step, tensors))
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<(TrainConfig, TrainState)> {
    let (config, step, tensors) = read_tensors(bytes)?;
    let mut by_name: HashMap<String, Tensor> = tensors.into_iter().map(|t| (t.name.clone(), t)).collect();
    let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
        let t = by_name
            .remove(name)
            .ok_or_else(|| MoeError::Format { offset: 0, message: format!("checkpoint lacks tensor {name}") })?;
        if t.shape != shape {
            return Err(MoeError::Format { offset: 0, message: format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape) });
        }
        Ok(t.data)
    };

    let n = config.n_experts;
    let (d, h, k) = (config.feature_dim, config.hidden_dim, config.prototypes_per_expert);
    let mut experts = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = ExpertParams::zeros(d, h, config.pixels, config.classes);
        let shapes = e.shapes();
        for ((name, shape), buf) in TENSOR_NAMES.iter().zip(shapes).zip(e.tensors_mut()) {
            *buf = take(&format!("expert.{j}.{name}"), &shape)?;
        }
        experts.push(e);
    }
    let gate = if config.router_kind.uses_gate() {
        Some(LinearGate {
            n_experts: n,
            dim: d,
            weights: take("gate.weights", &[n, d])?,
            biases: take("gate.biases", &[n])?,
        })
    } else {
        None
    };
    let mut libraries = Vec::with_capacity(n);
    for j in 0..n {
        let protos = take(&format!("frl.{j}.prototypes"), &[k, d])?;
        let importance = take(&format!("frl.{j}.importance"), &[k])?;
        let entries = protos
            .chunks_exact(d)
            .zip(importance)
            .map(|(p, w)| PrototypeEntry { prototype: p.to_vec(), importance: w })
            .collect();
        libraries.push(FeatureRetrievalLibrary::new(entries)?);
    }
    let mut projections = Vec::with_capacity(n);
    for j in 0..n {
        projections.push(Projection::from_matrix(h, d, take(&format!("projection.{j}"), &[d, h])?)?);
    }
    let mut state = TrainState { experts, libraries, projections, gate, moments: AdamMoments::default(), step };
    let names = param_names(&state);
    for (name, shape) in &names {
        state.moments.m.push(take(&format!("adam.m.{name}"), shape)?);
    }
    for (name, shape) in &names {
        state.moments.v.push(take(&format!("adam.v.{name}"), shape)?);
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(MoeError::Format { offset: 0, message: format!("unexpected tensor {extra}") });
    }
    state.check_config(&config)?;
    Ok((config, state))
}
