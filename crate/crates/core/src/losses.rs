//! Training objective: cross-entropy, load balancing and the FRL regularizer.
//!
//! The load-balancing and regularizer terms are evaluated exactly as
//! written, including the `− ln N` offset (which puts the uniform optimum at
//! `−2 ln N`, not zero) and the attention-mass term (which is always `N·B`).

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, MoeError, Result};
use crate::frl::FeatureRetrievalLibrary;
use crate::stats::{softmax, MASS_TOLERANCE, PROB_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub lb: f64,
    pub frl: f64,
    pub total: f64,
    pub lambda_lb: f64,
    pub lambda_frl: f64,
}

fn check_labels(logits: &[f64], labels: &[u8], classes: usize) -> Result<()> {
    if classes == 0 {
        return Err(MoeError::Config("class count must be positive".into()));
    }
    ensure_dim(labels.len() * classes, logits.len(), "logits for label grid")?;
    if let Some((p, &l)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= classes) {
        return Err(MoeError::InvalidInput(format!("label {l} at pixel {p} outside [0, {classes})")));
    }
    Ok(())
}

/// Mean over pixels of `−ln softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], labels: &[u8], classes: usize) -> Result<f64> {
    check_labels(logits, labels, classes)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = logits
        .chunks_exact(classes)
        .zip(labels)
        .map(|(row, &l)| -softmax(row)[l as usize].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy_with_grad(logits: &[f64], labels: &[u8], classes: usize) -> Result<(f64, Vec<f64>)> {
    check_labels(logits, labels, classes)?;
    if labels.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = labels.len() as f64;
    let mut grad = Vec::with_capacity(logits.len());
    let mut total = 0.0;
    for (row, &l) in logits.chunks_exact(classes).zip(labels) {
        let p = softmax(row);
        total -= p[l as usize].max(PROB_FLOOR).ln();
        for (c, pc) in p.into_iter().enumerate() {
            let target = if c == l as usize { 1.0 } else { 0.0 };
            grad.push((pc - target) / n);
        }
    }
    Ok((total / n, grad))
}

/// Batch-mean routing probability per expert.
pub fn expert_usage(batch_probs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = batch_probs
        .first()
        .map(Vec::len)
        .ok_or_else(|| MoeError::InvalidInput("load balance needs a nonempty batch".into()))?;
    let mut usage = vec![0.0; n];
    for (i, row) in batch_probs.iter().enumerate() {
        ensure_dim(n, row.len(), "routing probabilities")?;
        let mass: f64 = row.iter().sum();
        if row.iter().any(|p| !(*p >= 0.0)) || (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(MoeError::InvalidInput(format!("routing row {i} is not a distribution (mass {mass})")));
        }
        for (u, p) in usage.iter_mut().zip(row) {
            *u += p;
        }
    }
    let b = batch_probs.len() as f64;
    usage.iter_mut().for_each(|u| *u /= b);
    Ok(usage)
}

/// `Σ_j u_j ln u_j − ln N` with `u` the batch-mean routing probabilities.
pub fn load_balance_loss(batch_probs: &[Vec<f64>]) -> Result<f64> {
    let usage = expert_usage(batch_probs)?;
    Ok(load_balance_from_usage(&usage))
}

pub fn load_balance_from_usage(usage: &[f64]) -> f64 {
    let n = usage.len() as f64;
    usage.iter().map(|&u| u * u.max(PROB_FLOOR).ln()).sum::<f64>() - n.ln()
}

/// The two parts of the FRL regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrlRegularizerTerms {
    /// `Σ_j Σ_k ‖p_jk‖² + w_jk²`
    pub magnitude: f64,
    /// `Σ_j Σ_k Σ_i |α_jk^(i)|`
    pub attention: f64,
}

impl FrlRegularizerTerms {
    pub fn total(&self) -> f64 {
        self.magnitude + self.attention
    }
}

/// `batch_attention[j][i]` holds expert `j`'s attention weights for sample `i`.
pub fn frl_regularizer_terms(
    libraries: &[FeatureRetrievalLibrary],
    batch_attention: &[Vec<Vec<f64>>],
) -> Result<FrlRegularizerTerms> {
    ensure_dim(libraries.len(), batch_attention.len(), "attention per expert")?;
    let mut magnitude = 0.0;
    let mut attention = 0.0;
    for (lib, rows) in libraries.iter().zip(batch_attention) {
        for e in lib.entries() {
            magnitude += e.prototype.iter().map(|x| x * x).sum::<f64>() + e.importance * e.importance;
        }
        for row in rows {
            ensure_dim(lib.len(), row.len(), "attention row")?;
            attention += row.iter().map(|a| a.abs()).sum::<f64>();
        }
    }
    Ok(FrlRegularizerTerms { magnitude, attention })
}

pub fn frl_regularizer(libraries: &[FeatureRetrievalLibrary], batch_attention: &[Vec<Vec<f64>>]) -> Result<f64> {
    Ok(frl_regularizer_terms(libraries, batch_attention)?.total())
}

/// `ce + λ_LB · lb + λ_FRL · frl`.
pub fn total_loss(ce: f64, lb: f64, frl: f64, lambda_lb: f64, lambda_frl: f64) -> Result<LossBreakdown> {
    if !(lambda_lb >= 0.0) || !(lambda_frl >= 0.0) {
        return Err(MoeError::Config(format!("loss weights must be nonnegative, got ({lambda_lb}, {lambda_frl})")));
    }
    Ok(LossBreakdown { ce, lb, frl, total: ce + lambda_lb * lb + lambda_frl * frl, lambda_lb, lambda_frl })
}
