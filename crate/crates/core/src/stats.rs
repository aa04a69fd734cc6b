//! Feature-to-distribution normalization and the KL / JS divergences used by
//! both the router and the aggregator.
//!
//! All divergences are in nats. Every probability is clamped to
//! [`PROB_FLOOR`] before a logarithm is taken, which realizes `0 ln 0 = 0`
//! without ever dividing by zero.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, MoeError, Result};

/// Floor applied to probabilities before any logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// A probability vector over `d >= 2` bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates and wraps a probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(MoeError::Dimension(format!(
                "distribution needs at least 2 bins, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(MoeError::InvalidInput(format!("probability entry {bad} is not a finite nonnegative value")));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(MoeError::InvalidInput(format!("probabilities sum to {mass}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(vec![1.0 / d as f64; d])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().map(|&p| p * p.max(PROB_FLOOR).ln()).sum::<f64>()
    }
}

/// Max-subtracted softmax. Empty input yields an empty vector.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax over the channels of a pooled feature vector.
pub fn normalize(features: &[f64]) -> Result<DiscreteDistribution> {
    if features.len() < 2 {
        return Err(MoeError::Dimension(format!(
            "normalize needs at least 2 channels, got {}",
            features.len()
        )));
    }
    if let Some((i, v)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(MoeError::InvalidInput(format!("feature entry {i} is {v}")));
    }
    Ok(DiscreteDistribution { probs: softmax(features) })
}

fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pk, &qk)| {
            let pk = pk.max(PROB_FLOOR);
            let qk = qk.max(PROB_FLOOR);
            pk * (pk / qk).ln()
        })
        .sum()
}

/// `KL(p || q)` in nats.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    ensure_dim(p.dim(), q.dim(), "kl_divergence")?;
    Ok(kl_raw(&p.probs, &q.probs))
}

/// Jensen-Shannon divergence `½ KL(q || m) + ½ KL(p || m)` with `m` the
/// entrywise midpoint. Symmetric and bounded by `ln 2`.
pub fn js_divergence(q: &DiscreteDistribution, p: &DiscreteDistribution) -> Result<f64> {
    ensure_dim(q.dim(), p.dim(), "js_divergence")?;
    Ok(js_raw(&q.probs, &p.probs))
}

pub(crate) fn js_raw(q: &[f64], p: &[f64]) -> f64 {
    // The midpoint is computed with `+` which commutes exactly, and the two
    // halves are summed in a fixed (sorted) order, so swapping arguments is
    // bit-identical.
    let mid: Vec<f64> = q.iter().zip(p).map(|(a, b)| 0.5 * (a + b)).collect();
    let a = kl_raw(q, &mid);
    let b = kl_raw(p, &mid);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    0.5 * lo + 0.5 * hi
}

/// Gradient of `JS(q, r)` with respect to `r`, ignoring the clamp.
pub(crate) fn js_grad_wrt_second(q: &[f64], r: &[f64]) -> Vec<f64> {
    q.iter()
        .zip(r)
        .map(|(&qk, &rk)| {
            let m = (0.5 * (qk + rk)).max(PROB_FLOOR);
            0.5 * (rk.max(PROB_FLOOR) / m).ln()
        })
        .collect()
}
