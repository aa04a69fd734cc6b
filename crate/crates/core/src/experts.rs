//! Compact experts: a ReLU encoder producing the intermediate representation
//! and an affine head producing per-pixel class logits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, MoeError, Result};

/// Parameters of one expert. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertParams {
    pub dim: usize,
    pub hidden: usize,
    pub pixels: usize,
    pub classes: usize,
    /// Row-major `hidden × dim`.
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    /// Row-major `(pixels · classes) × hidden`; output row `p · classes + c`.
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertOutput {
    /// Post-ReLU encoder activations.
    pub intermediate: Vec<f64>,
    /// `pixels × classes` logits, pixel-major.
    pub logits: Vec<f64>,
}

pub const TENSOR_NAMES: [&str; 4] = ["enc_w", "enc_b", "head_w", "head_b"];

impl ExpertParams {
    pub fn zeros(dim: usize, hidden: usize, pixels: usize, classes: usize) -> Self {
        let out = pixels * classes;
        Self {
            dim,
            hidden,
            pixels,
            classes,
            enc_w: vec![0.0; hidden * dim],
            enc_b: vec![0.0; hidden],
            head_w: vec![0.0; out * hidden],
            head_b: vec![0.0; out],
        }
    }

    /// Uniform in `±1/√fan_in` for every weight and bias.
    pub fn random<R: Rng + ?Sized>(dim: usize, hidden: usize, pixels: usize, classes: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(dim, hidden, pixels, classes);
        let enc = 1.0 / (dim as f64).sqrt();
        let head = 1.0 / (hidden as f64).sqrt();
        p.enc_w.iter_mut().for_each(|w| *w = rng.random_range(-enc..=enc));
        p.enc_b.iter_mut().for_each(|w| *w = rng.random_range(-enc..=enc));
        p.head_w.iter_mut().for_each(|w| *w = rng.random_range(-head..=head));
        p.head_b.iter_mut().for_each(|w| *w = rng.random_range(-head..=head));
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dim, self.hidden, self.pixels, self.classes)
    }

    pub fn outputs(&self) -> usize {
        self.pixels * self.classes
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.enc_w, &self.enc_b, &self.head_w, &self.head_b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.enc_w, &mut self.enc_b, &mut self.head_w, &mut self.head_b]
    }

    pub fn shapes(&self) -> [Vec<usize>; 4] {
        [vec![self.hidden, self.dim], vec![self.hidden], vec![self.outputs(), self.hidden], vec![self.outputs()]]
    }

    /// Checks buffer lengths and finiteness.
    pub fn validate(&self) -> Result<()> {
        for (name, (t, shape)) in TENSOR_NAMES.iter().zip(self.tensors().into_iter().zip(self.shapes())) {
            ensure_dim(shape.iter().product(), t.len(), name)?;
            if t.iter().any(|v| !v.is_finite()) {
                return Err(MoeError::InvalidInput(format!("expert tensor {name} has non-finite entries")));
            }
        }
        Ok(())
    }

    fn pre_activation(&self, feature: &[f64]) -> Vec<f64> {
        self.enc_w
            .chunks_exact(self.dim)
            .zip(&self.enc_b)
            .map(|(row, b)| row.iter().zip(feature).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    /// Encoder only: `max(0, W_enc x + b_enc)`.
    pub fn encode(&self, feature: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim, feature.len(), "expert feature")?;
        Ok(self.pre_activation(feature).into_iter().map(|z| z.max(0.0)).collect())
    }

    fn head(&self, intermediate: &[f64]) -> Vec<f64> {
        self.head_w
            .chunks_exact(self.hidden)
            .zip(&self.head_b)
            .map(|(row, b)| row.iter().zip(intermediate).map(|(w, h)| w * h).sum::<f64>() + b)
            .collect()
    }

    pub fn forward(&self, feature: &[f64]) -> Result<ExpertOutput> {
        let intermediate = self.encode(feature)?;
        let logits = self.head(&intermediate);
        Ok(ExpertOutput { intermediate, logits })
    }

    /// Accumulates `scale ·` the parameter gradient into `grads`.
    ///
    /// `logit_grad` is `dL/dlogits`; `intermediate_grad`, when present, is an
    /// extra `dL/dh` added before the ReLU mask.
    pub fn backward_into(
        &self,
        feature: &[f64],
        logit_grad: &[f64],
        intermediate_grad: Option<&[f64]>,
        scale: f64,
        grads: &mut ExpertParams,
    ) -> Result<()> {
        ensure_dim(self.dim, feature.len(), "expert feature")?;
        ensure_dim(self.outputs(), logit_grad.len(), "logit gradient")?;
        if let Some(g) = intermediate_grad {
            ensure_dim(self.hidden, g.len(), "intermediate gradient")?;
        }
        ensure_dim(self.enc_w.len(), grads.enc_w.len(), "gradient buffer")?;
        ensure_dim(self.head_w.len(), grads.head_w.len(), "gradient buffer")?;

        let pre = self.pre_activation(feature);
        let hidden: Vec<f64> = pre.iter().map(|z| z.max(0.0)).collect();

        let mut dh = match intermediate_grad {
            Some(g) => g.iter().map(|v| v * scale).collect(),
            None => vec![0.0; self.hidden],
        };
        for (o, &g) in logit_grad.iter().enumerate() {
            let g = g * scale;
            if g == 0.0 {
                continue;
            }
            grads.head_b[o] += g;
            let row = o * self.hidden;
            for k in 0..self.hidden {
                grads.head_w[row + k] += g * hidden[k];
                dh[k] += g * self.head_w[row + k];
            }
        }
        for k in 0..self.hidden {
            if pre[k] <= 0.0 {
                continue;
            }
            let d = dh[k];
            grads.enc_b[k] += d;
            for (g, x) in grads.enc_w[k * self.dim..(k + 1) * self.dim].iter_mut().zip(feature) {
                *g += d * x;
            }
        }
        Ok(())
    }

    /// Exact gradient of the loss whose logit gradient is `logit_grad`.
    pub fn backward(&self, feature: &[f64], logit_grad: &[f64]) -> Result<ExpertParams> {
        let mut grads = self.zeros_like();
        self.backward_into(feature, logit_grad, None, 1.0, &mut grads)?;
        Ok(grads)
    }
}

pub fn expert_forward(feature: &[f64], params: &ExpertParams) -> Result<ExpertOutput> {
    params.forward(feature)
}

pub fn expert_backward(feature: &[f64], params: &ExpertParams, logit_gradient: &[f64]) -> Result<ExpertParams> {
    params.backward(feature, logit_gradient)
}
