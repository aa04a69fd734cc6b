//! Segmentation metrics from a confusion matrix.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, MoeError, Result};

/// `counts[truth * classes + predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub miou: f64,
    pub mf1: f64,
    pub mpre: f64,
    pub mrec: f64,
    /// Only classes that appear in truth or prediction.
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        ensure_dim(classes * classes, counts.len(), "confusion counts")?;
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accumulate(&mut self, predicted: &[u8], truth: &[u8]) -> Result<()> {
        ensure_dim(truth.len(), predicted.len(), "predicted grid")?;
        if let Some(bad) = predicted.iter().chain(truth).find(|&&c| c as usize >= self.classes) {
            return Err(MoeError::InvalidInput(format!("class {bad} outside [0, {})", self.classes)));
        }
        for (&p, &t) in predicted.iter().zip(truth) {
            self.counts[t as usize * self.classes + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        ensure_dim(self.classes, other.classes, "merged class count")?;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn per_class(&self) -> Vec<ClassMetrics> {
        let c = self.classes;
        (0..c)
            .filter_map(|k| {
                let tp = self.get(k, k);
                let fp: u64 = (0..c).filter(|&t| t != k).map(|t| self.get(t, k)).sum();
                let fn_: u64 = (0..c).filter(|&p| p != k).map(|p| self.get(k, p)).sum();
                if tp + fp + fn_ == 0 {
                    return None;
                }
                let precision = ratio(tp, tp + fp);
                let recall = ratio(tp, tp + fn_);
                let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
                Some(ClassMetrics { class: k, iou: ratio(tp, tp + fp + fn_), precision, recall, f1 })
            })
            .collect()
    }

    /// Unweighted means over classes present in truth or prediction.
    pub fn summary(&self) -> Result<MetricSummary> {
        let per_class = self.per_class();
        if per_class.is_empty() {
            return Err(MoeError::UndefinedMetric("no class occurs in truth or prediction".into()));
        }
        let n = per_class.len() as f64;
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n;
        Ok(MetricSummary {
            miou: mean(|m| m.iou),
            mf1: mean(|m| m.f1),
            mpre: mean(|m| m.precision),
            mrec: mean(|m| m.recall),
            per_class,
        })
    }
}
