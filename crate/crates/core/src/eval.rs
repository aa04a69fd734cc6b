//! Frozen-model evaluation: segmentation metrics, routing purity and expert
//! selection histograms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::losses::cross_entropy;
use crate::metrics::{ConfusionMatrix, MetricSummary};
use crate::trainer::{Executor, TrainConfig, TrainState};

/// Per-scenario consistency of the top-1 routed expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingPurity {
    /// `(scenario id, modal expert, purity)` in ascending scenario order.
    pub per_scenario: Vec<ScenarioPurity>,
    pub macro_average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPurity {
    pub scenario: u16,
    pub modal_expert: usize,
    pub samples: usize,
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: MetricSummary,
    pub mean_ce: f64,
    pub purity: Option<RoutingPurity>,
    /// How often each expert was selected.
    pub selection_histogram: Vec<u64>,
    /// How often each expert was the top-1 choice.
    pub top1_histogram: Vec<u64>,
}

/// Fraction of each scenario's samples whose top-1 expert is that
/// scenario's most frequent top-1 expert (lowest index on ties).
pub fn routing_purity(assignments: &[(u16, usize)], n_experts: usize) -> Option<RoutingPurity> {
    let mut groups: BTreeMap<u16, Vec<u64>> = BTreeMap::new();
    for &(scenario, expert) in assignments {
        groups.entry(scenario).or_insert_with(|| vec![0; n_experts])[expert] += 1;
    }
    if groups.is_empty() {
        return None;
    }
    let per_scenario: Vec<ScenarioPurity> = groups
        .into_iter()
        .map(|(scenario, counts)| {
            let samples = counts.iter().sum::<u64>() as usize;
            let mut modal = 0;
            for (j, c) in counts.iter().enumerate() {
                if *c > counts[modal] {
                    modal = j;
                }
            }
            ScenarioPurity { scenario, modal_expert: modal, samples, purity: counts[modal] as f64 / samples as f64 }
        })
        .collect();
    let macro_average = per_scenario.iter().map(|s| s.purity).sum::<f64>() / per_scenario.len() as f64;
    Some(RoutingPurity { per_scenario, macro_average })
}

pub fn evaluate_with(state: &TrainState, config: &TrainConfig, dataset: &Dataset, exec: &Executor) -> Result<EvalReport> {
    config.check_dataset(dataset)?;
    state.check_config(config)?;
    let results = exec.map(dataset.len(), |i| {
        let s = &dataset.samples[i];
        state.forward(&s.feature_f64(), config).and_then(|f| {
            let ce = cross_entropy(&f.logits, &s.labels, config.classes)?;
            let top1 = f.decision.top1();
            Ok((f.predicted_labels(config.classes), f.decision.selected, top1, ce))
        })
    });
    let mut cm = ConfusionMatrix::new(config.classes);
    let mut selection_histogram = vec![0u64; config.n_experts];
    let mut top1_histogram = vec![0u64; config.n_experts];
    let mut assignments = Vec::new();
    let mut ce_total = 0.0;
    for (sample, result) in dataset.samples.iter().zip(results) {
        let (pred, selected, top1, ce) = result?;
        cm.accumulate(&pred, &sample.labels)?;
        selected.iter().for_each(|&j| selection_histogram[j] += 1);
        top1_histogram[top1] += 1;
        if let Some(id) = sample.scenario_id {
            assignments.push((id, top1));
        }
        ce_total += ce;
    }
    Ok(EvalReport {
        metrics: cm.summary()?,
        mean_ce: if dataset.is_empty() { 0.0 } else { ce_total / dataset.len() as f64 },
        purity: routing_purity(&assignments, config.n_experts),
        selection_histogram,
        top1_histogram,
    })
}

pub fn evaluate(state: &TrainState, config: &TrainConfig, dataset: &Dataset) -> Result<EvalReport> {
    evaluate_with(state, config, dataset, &Executor::sequential())
}
