//! Expert-wise feature retrieval libraries (FRLs).
//!
//! Each expert owns a small memory of prototype vectors with importance
//! weights. A query feature reads the memory through a softmax over cosine
//! similarities; the memory is refined with an attention-weighted
//! read-then-update step driven by the expert's projected intermediate
//! features.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, MoeError, Result};
use crate::stats::softmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeEntry {
    pub prototype: Vec<f64>,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRetrievalLibrary {
    dim: usize,
    entries: Vec<PrototypeEntry>,
}

/// Cosine similarity; any zero-norm operand yields 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Sum whose result depends only on the multiset of inputs, not their order.
fn order_free_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values.iter() {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl FeatureRetrievalLibrary {
    pub fn new(entries: Vec<PrototypeEntry>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| MoeError::InvalidInput("a library needs at least one prototype".into()))?;
        let dim = first.prototype.len();
        for (k, e) in entries.iter().enumerate() {
            ensure_dim(dim, e.prototype.len(), &format!("prototype {k}"))?;
            if !(e.importance >= 0.0 && e.importance.is_finite()) {
                return Err(MoeError::InvalidInput(format!("prototype {k} importance {} is negative or non-finite", e.importance)));
            }
            if e.prototype.iter().any(|v| !v.is_finite()) {
                return Err(MoeError::InvalidInput(format!("prototype {k} has non-finite coordinates")));
            }
        }
        Ok(Self { dim, entries })
    }

    /// Standard-normal prototypes, L2-normalized, with unit importance.
    pub fn random<R: Rng + ?Sized>(prototypes: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let entries = (0..prototypes)
            .map(|_| {
                let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                PrototypeEntry { prototype: v, importance: 1.0 }
            })
            .collect();
        Self::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PrototypeEntry] {
        &self.entries
    }

    /// Attention weights of `query` over the prototypes.
    pub fn attend(&self, query: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim, query.len(), "attend query")?;
        let sims: Vec<f64> = self.entries.iter().map(|e| cosine_similarity(query, &e.prototype)).collect();
        Ok(softmax(&sims))
    }

    /// Attention-weighted combination of the prototypes.
    pub fn retrieve(&self, weights: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.entries.len(), weights.len(), "retrieve weights")?;
        let mut out = vec![0.0; self.dim];
        for (e, &a) in self.entries.iter().zip(weights) {
            for (o, p) in out.iter_mut().zip(&e.prototype) {
                *o += a * p;
            }
        }
        Ok(out)
    }

    fn check_batch(&self, batch_weights: &[Vec<f64>], batch_projected: &[Vec<f64>], eta: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(MoeError::Config(format!("update rate eta must lie in [0, 1], got {eta}")));
        }
        ensure_dim(batch_weights.len(), batch_projected.len(), "update batch size")?;
        for (w, v) in batch_weights.iter().zip(batch_projected) {
            ensure_dim(self.entries.len(), w.len(), "update attention weights")?;
            ensure_dim(self.dim, v.len(), "update projected feature")?;
        }
        Ok(())
    }

    /// Batch-aggregated read-then-update.
    ///
    /// With `ā_k` the batch mean of the attention on entry `k` and `v̄_k` the
    /// attention-weighted mean of the projected features,
    /// `p_k ← (1 − η ā_k) p_k + η ā_k v̄_k` and `w_k ← (1 − η ā_k) w_k + η ā_k`.
    /// Every reduction is order-free, so permuting the batch is bit-identical.
    pub fn read_then_update(&mut self, batch_weights: &[Vec<f64>], batch_projected: &[Vec<f64>], eta: f64) -> Result<()> {
        self.check_batch(batch_weights, batch_projected, eta)?;
        let b = batch_weights.len();
        if eta == 0.0 || b == 0 {
            return Ok(());
        }
        let mut scratch = Vec::with_capacity(b);
        for (k, entry) in self.entries.iter_mut().enumerate() {
            scratch.clear();
            scratch.extend(batch_weights.iter().map(|w| w[k]));
            let mass = order_free_sum(&mut scratch);
            if mass <= 0.0 {
                continue;
            }
            let rate = eta * (mass / b as f64);
            for (c, p) in entry.prototype.iter_mut().enumerate() {
                scratch.clear();
                scratch.extend(batch_weights.iter().zip(batch_projected).map(|(w, v)| w[k] * v[c]));
                let target = order_free_sum(&mut scratch) / mass;
                *p = (1.0 - rate) * *p + rate * target;
            }
            entry.importance = (1.0 - rate) * entry.importance + rate;
        }
        Ok(())
    }

    /// Per-sample read-then-update, applied in batch order.
    pub fn read_then_update_sequential(
        &mut self,
        batch_weights: &[Vec<f64>],
        batch_projected: &[Vec<f64>],
        eta: f64,
    ) -> Result<()> {
        self.check_batch(batch_weights, batch_projected, eta)?;
        if eta == 0.0 {
            return Ok(());
        }
        for (w, v) in batch_weights.iter().zip(batch_projected) {
            for (entry, &a) in self.entries.iter_mut().zip(w) {
                let rate = eta * a;
                for (p, t) in entry.prototype.iter_mut().zip(v) {
                    *p = (1.0 - rate) * *p + rate * t;
                }
                entry.importance = (1.0 - rate) * entry.importance + rate;
            }
        }
        Ok(())
    }

    /// Multiplicative shrinkage of prototypes and importances.
    pub fn shrink(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.prototype.iter_mut().for_each(|p| *p *= factor);
            e.importance *= factor;
        }
    }
}

/// Fixed linear map from an expert's intermediate space into prototype space.
///
/// Spatial positions are mean-pooled before the map is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim × in_dim`.
    matrix: Vec<f64>,
}

impl Projection {
    /// Gaussian entries with variance `1 / in_dim`.
    pub fn random<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (in_dim as f64).sqrt();
        let matrix = (0..in_dim * out_dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { in_dim, out_dim, matrix }
    }

    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Self { in_dim: dim, out_dim: dim, matrix }
    }

    pub fn from_matrix(in_dim: usize, out_dim: usize, matrix: Vec<f64>) -> Result<Self> {
        ensure_dim(in_dim * out_dim, matrix.len(), "projection matrix")?;
        Ok(Self { in_dim, out_dim, matrix })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Projects a flat intermediate vector (a single spatial position).
    pub fn project(&self, intermediate: &[f64]) -> Result<Vec<f64>> {
        self.project_pooled(intermediate, 1)
    }

    /// Mean-pools `positions × in_dim` activations, then projects.
    pub fn project_pooled(&self, intermediate: &[f64], positions: usize) -> Result<Vec<f64>> {
        if positions == 0 {
            return Err(MoeError::InvalidInput("projection needs at least one spatial position".into()));
        }
        ensure_dim(positions * self.in_dim, intermediate.len(), "projection input")?;
        if intermediate.iter().any(|v| !v.is_finite()) {
            return Err(MoeError::InvalidInput("projection input has non-finite entries".into()));
        }
        let pooled: Vec<f64> = if positions == 1 {
            intermediate.to_vec()
        } else {
            (0..self.in_dim)
                .map(|c| (0..positions).map(|s| intermediate[s * self.in_dim + c]).sum::<f64>() / positions as f64)
                .collect()
        };
        Ok(self.apply(&pooled))
    }

    pub(crate) fn apply(&self, pooled: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.in_dim)
            .map(|row| row.iter().zip(pooled).map(|(m, x)| m * x).sum())
            .collect()
    }

    /// `Mᵀ g`, the pull-back of a gradient in prototype space.
    pub(crate) fn apply_transpose(&self, grad: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        for (row, g) in self.matrix.chunks_exact(self.in_dim).zip(grad) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += m * g;
            }
        }
        out
    }
}

/// Text dump of all libraries: one row per prototype,
/// `expert,prototype,importance,x_0,...,x_{d-1}` with 6 decimal places.
pub fn format_dump(libraries: &[FeatureRetrievalLibrary]) -> String {
    let mut out = String::new();
    for (j, lib) in libraries.iter().enumerate() {
        for (k, e) in lib.entries.iter().enumerate() {
            let _ = write!(out, "{j},{k},{:.6}", e.importance);
            for x in &e.prototype {
                let _ = write!(out, ",{x:.6}");
            }
            out.push('\n');
        }
    }
    out
}
