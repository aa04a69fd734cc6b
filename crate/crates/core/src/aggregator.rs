//! Statistic-augmented aggregation: routed experts are reweighted by the
//! reciprocal JS distance between their intermediate distribution and the
//! query distribution, and their logits are mixed with those weights.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, MoeError, Result};
use crate::frl::Projection;
use crate::stats::{js_divergence, normalize, DiscreteDistribution};

/// Per-sample aggregation weights keyed by routed expert index (ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationWeights {
    pub experts: Vec<usize>,
    pub divergences: Vec<f64>,
    pub raw_weights: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AggregationWeights {
    /// Weights given directly (no divergences), e.g. from a learned gate.
    pub fn from_weights(experts: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        ensure_dim(experts.len(), weights.len(), "aggregation weights")?;
        if experts.is_empty() {
            return Err(MoeError::InvalidInput("routed set is empty".into()));
        }
        let mut pairs: Vec<(usize, f64)> = experts.into_iter().zip(weights).collect();
        pairs.sort_by_key(|p| p.0);
        let (experts, weights): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
        Ok(Self { divergences: vec![0.0; experts.len()], raw_weights: weights.clone(), experts, weights })
    }

    pub fn weight_of(&self, expert: usize) -> Option<f64> {
        self.experts.iter().position(|&e| e == expert).map(|i| self.weights[i])
    }

    /// `dL/dδ_j` given `dL/dβ_j`, through `β = w̃ / Σ w̃` and `w̃ = 1/(ε + δ)`.
    pub fn divergence_grad(&self, dloss_dbeta: &[f64]) -> Vec<f64> {
        let total: f64 = self.raw_weights.iter().sum();
        let mean: f64 = self.weights.iter().zip(dloss_dbeta).map(|(b, a)| b * a).sum();
        self.raw_weights
            .iter()
            .zip(dloss_dbeta)
            .map(|(w, a)| -(w * w / total) * (a - mean))
            .collect()
    }
}

/// Pre-normalization vector of an expert's intermediate: projected into the
/// feature dimension when the sizes differ, unchanged otherwise.
pub fn distribution_logits(intermediate: &[f64], feature_dim: usize, projection: &Projection) -> Result<Vec<f64>> {
    if intermediate.len() == feature_dim {
        if let Some(bad) = intermediate.iter().find(|v| !v.is_finite()) {
            return Err(MoeError::InvalidInput(format!("intermediate entry {bad} is not finite")));
        }
        Ok(intermediate.to_vec())
    } else {
        ensure_dim(feature_dim, projection.out_dim(), "projection output")?;
        projection.project(intermediate)
    }
}

/// `R_j = Norm(h_j)`, projecting with `ψ_j` when `h_dim ≠ d`.
pub fn output_distribution(
    intermediate: &[f64],
    feature_dim: usize,
    projection: &Projection,
) -> Result<DiscreteDistribution> {
    normalize(&distribution_logits(intermediate, feature_dim, projection)?)
}

/// `δ_j = JS(Q, R_j)`, `w̃_j = 1/(ε + δ_j)`, `β_j = w̃_j / Σ w̃`.
pub fn aggregation_weights(
    query_dist: &DiscreteDistribution,
    routed_dists: &[(usize, DiscreteDistribution)],
    epsilon: f64,
) -> Result<AggregationWeights> {
    if routed_dists.is_empty() {
        return Err(MoeError::InvalidInput("routed set is empty".into()));
    }
    if !(epsilon > 0.0) {
        return Err(MoeError::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut order: Vec<usize> = (0..routed_dists.len()).collect();
    order.sort_by_key(|&i| routed_dists[i].0);
    let mut experts = Vec::with_capacity(order.len());
    let mut divergences = Vec::with_capacity(order.len());
    for &i in &order {
        let (j, dist) = &routed_dists[i];
        if experts.last() == Some(j) {
            return Err(MoeError::InvalidInput(format!("expert {j} routed twice")));
        }
        experts.push(*j);
        divergences.push(js_divergence(query_dist, dist)?);
    }
    let raw_weights: Vec<f64> = divergences.iter().map(|d| 1.0 / (epsilon + d)).collect();
    let total: f64 = raw_weights.iter().sum();
    let weights = raw_weights.iter().map(|w| w / total).collect();
    Ok(AggregationWeights { experts, divergences, raw_weights, weights })
}

/// `ŷ = Σ_j β_j y_j` in logit space.
pub fn aggregate(weights: &AggregationWeights, outputs: &[(usize, &[f64])]) -> Result<Vec<f64>> {
    if outputs.len() != weights.experts.len() {
        return Err(MoeError::InvalidInput(format!(
            "{} expert outputs for {} aggregation weights",
            outputs.len(),
            weights.experts.len()
        )));
    }
    let len = outputs.first().map(|o| o.1.len()).unwrap_or(0);
    let mut out = vec![0.0; len];
    for (&j, &b) in weights.experts.iter().zip(&weights.weights) {
        let y = outputs
            .iter()
            .find(|o| o.0 == j)
            .ok_or_else(|| MoeError::InvalidInput(format!("no output for routed expert {j}")))?
            .1;
        ensure_dim(len, y.len(), "expert output")?;
        for (o, v) in out.iter_mut().zip(y) {
            *o += b * v;
        }
    }
    Ok(out)
}
