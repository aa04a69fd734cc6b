//! Browser playground for the mixture-of-experts core.
//!
//! The computations live in plain functions so they can be tested natively;
//! the `wasm` module wraps them for JavaScript and returns JSON strings.

use moe_ram::aggregator::aggregation_weights;
use moe_ram::data::ScenarioFamily;
use moe_ram::eval::evaluate;
use moe_ram::router::{route, RouterKind};
use moe_ram::stats::{js_divergence, kl_divergence, normalize};
use moe_ram::trainer::{train, TrainConfig, TrainState};
use moe_ram::{MoeError, Result};
use serde::Serialize;

#[cfg(target_arch = "wasm32")]
mod wasm;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceView {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub kl_pq: f64,
    pub kl_qp: f64,
    pub js: f64,
}

/// Normalizes two raw feature vectors and compares them.
pub fn divergences(p_features: &[f64], q_features: &[f64]) -> Result<DivergenceView> {
    let p = normalize(p_features)?;
    let q = normalize(q_features)?;
    Ok(DivergenceView {
        kl_pq: kl_divergence(&p, &q)?,
        kl_qp: kl_divergence(&q, &p)?,
        js: js_divergence(&p, &q)?,
        p: p.into_inner(),
        q: q.into_inner(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutingView {
    pub query: Vec<f64>,
    pub divergences: Vec<f64>,
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
    pub selected: Vec<usize>,
    /// Aggregation weight of each selected expert, in `selected` order.
    pub weights: Vec<f64>,
}

/// Routes `query` against one retrieved vector per expert, then weights the
/// selected experts as if each expert's output statistic equalled its
/// retrieved vector.
///
/// `experts` is row-major, `experts.len() / query.len()` rows.
pub fn routing(query: &[f64], experts: &[f64], tau: f64, epsilon: f64, top_k: usize) -> Result<RoutingView> {
    let dim = query.len();
    if dim == 0 || experts.is_empty() || !experts.len().is_multiple_of(dim) {
        return Err(MoeError::Dimension(format!(
            "expert table of {} values does not split into rows of {dim}",
            experts.len()
        )));
    }
    let q = normalize(query)?;
    let dists = experts.chunks_exact(dim).map(normalize).collect::<Result<Vec<_>>>()?;
    let decision = route(&q, &dists, epsilon, tau, top_k)?;
    let divergences = dists.iter().map(|d| js_divergence(&q, d)).collect::<Result<Vec<_>>>()?;
    let routed: Vec<_> = decision.selected.iter().map(|&j| (j, dists[j].clone())).collect();
    let beta = aggregation_weights(&q, &routed, epsilon)?;
    Ok(RoutingView {
        query: q.into_inner(),
        divergences,
        scores: decision.scores,
        probs: decision.probs,
        selected: decision.selected,
        weights: beta.weights,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingView {
    pub router: String,
    pub ce_history: Vec<f64>,
    pub initial_ce: f64,
    pub final_ce: f64,
    pub miou: f64,
    pub purity: f64,
    pub per_scenario_purity: Vec<f64>,
    pub top1_histogram: Vec<u64>,
}

pub const TOY_PER_SCENARIO: usize = 120;

/// Trains a four-expert model on three synthetic scenarios and scores it on
/// the training set.
pub fn toy_training(seed: u64, steps: usize, router: &str) -> Result<TrainingView> {
    let kind = RouterKind::from_cli_name(router)
        .ok_or_else(|| MoeError::Config(format!("unknown router {router:?}, expected moe-rm, linear or soft")))?;
    let family = ScenarioFamily { per_scenario: TOY_PER_SCENARIO, ..ScenarioFamily::default() };
    let data = family.generate(seed)?;
    let config = TrainConfig {
        n_experts: 4,
        top_k: 2,
        prototypes_per_expert: 4,
        feature_dim: family.dim,
        pixels: family.pixels,
        classes: family.classes,
        batch_size: 16,
        steps,
        seed,
        router_kind: kind,
        ..TrainConfig::default()
    };
    let initial = evaluate(&TrainState::init(&config)?, &config, &data)?;
    let (state, history) = train(&data, &config)?;
    let report = evaluate(&state, &config, &data)?;
    let purity = report.purity.as_ref();
    Ok(TrainingView {
        router: kind.cli_name().to_string(),
        ce_history: history.iter().map(|h| h.loss.ce).collect(),
        initial_ce: initial.mean_ce,
        final_ce: report.mean_ce,
        miou: report.metrics.miou,
        purity: purity.map_or(f64::NAN, |p| p.macro_average),
        per_scenario_purity: purity.map(|p| p.per_scenario.iter().map(|s| s.purity).collect()).unwrap_or_default(),
        top1_histogram: report.top1_histogram,
    })
}

/// Compact JSON; non-finite numbers become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| format!("{{\"error\":{:?}}}", e.to_string()))
}
