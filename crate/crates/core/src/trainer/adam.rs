//! Bias-corrected Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, weight_decay: 1e-4, eps: 1e-8 }
    }
}

/// First and second moments, one buffer per parameter tensor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdamMoments {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamMoments {
    pub fn zeros_for(lengths: impl IntoIterator<Item = usize>) -> Self {
        let m: Vec<Vec<f64>> = lengths.into_iter().map(|n| vec![0.0; n]).collect();
        Self { v: m.clone(), m }
    }
}

/// One Adam step on a single tensor. `step` is 1-based.
///
/// Weight decay multiplies the parameters by `1 − lr · wd` before the
/// moment update.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    hyper: &AdamHyper,
) -> Result<()> {
    ensure_dim(params.len(), grads.len(), "adam gradient")?;
    ensure_dim(params.len(), m.len(), "adam first moment")?;
    ensure_dim(params.len(), v.len(), "adam second moment")?;
    let t = step.max(1) as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    let decay = 1.0 - hyper.lr * hyper.weight_decay;
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *p *= decay;
        *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
        *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let hyper = AdamHyper { weight_decay: 0.0, ..AdamHyper::default() };
        let mut p = vec![0.3, -1.2, 5.0];
        let before = p.clone();
        let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
        for t in 1..10 {
            adam_update(&mut p, &[0.0; 3], &mut m, &mut v, t, &hyper).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let hyper = AdamHyper { weight_decay: 0.0, ..AdamHyper::default() };
        let mut p = vec![1.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1, &hyper).unwrap();
        // m̂ = v̂ = 1 after bias correction: Δ = lr / (1 + eps)
        assert!((1.0 - p[0] - 3e-4 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let hyper = AdamHyper { weight_decay: 0.0, ..AdamHyper::default() };
        let mut p = vec![0.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        let mut last = 0.0;
        for t in 1..=2000 {
            let before = p[0];
            adam_update(&mut p, &[0.37], &mut m, &mut v, t, &hyper).unwrap();
            last = before - p[0];
        }
        assert!((last - 3e-4).abs() < 1e-9);
    }

    #[test]
    fn decoupled_decay_is_multiplicative() {
        let hyper = AdamHyper { lr: 0.1, weight_decay: 0.5, ..AdamHyper::default() };
        let mut p = vec![2.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        adam_update(&mut p, &[0.0], &mut m, &mut v, 1, &hyper).unwrap();
        assert!((p[0] - 2.0 * 0.95).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let hyper = AdamHyper::default();
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        assert!(adam_update(&mut [0.0, 0.0], &[1.0], &mut m, &mut v, 1, &hyper).is_err());
    }
}
