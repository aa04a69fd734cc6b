//! End-to-end training: per-sample retrieval, routing, sparse expert
//! execution and aggregation, the loss breakdown, FRL maintenance and the
//! optimizer step, in that order.

pub mod adam;
pub mod checkpoint;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregator::{aggregate, aggregation_weights, distribution_logits, AggregationWeights};
use crate::data::{Dataset, Sample};
use crate::error::{ensure_dim, MoeError, Result};
use crate::experts::ExpertParams;
use crate::frl::{FeatureRetrievalLibrary, Projection};
use crate::losses::{cross_entropy_with_grad, expert_usage, frl_regularizer, load_balance_from_usage, total_loss, LossBreakdown};
use crate::router::{route, top_k_select, LinearGate, RouterKind, RoutingDecision};
use crate::stats::{js_grad_wrt_second, normalize, softmax, DiscreteDistribution};

use adam::{adam_update, AdamHyper, AdamMoments};

/// How the FRL read-then-update rule is applied within a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrlUpdateMode {
    /// One order-free update from batch-aggregated attention.
    Batched,
    /// One update per sample, in batch order.
    Sequential,
}

/// How `ψ_j` is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    Random,
    /// Requires `hidden_dim == feature_dim`.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_experts: usize,
    pub top_k: usize,
    pub prototypes_per_expert: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub classes: usize,
    pub pixels: usize,
    pub eta: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub lambda_lb: f64,
    pub lambda_frl: f64,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub weight_decay: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub router_kind: RouterKind,
    pub frl_update: FrlUpdateMode,
    pub projection: ProjectionKind,
    /// Backpropagate through the aggregation weights instead of treating
    /// them as constants.
    pub differentiate_aggregation: bool,
    /// Shrink prototypes and importances by `1 − lr · λ_FRL` each step.
    pub frl_shrinkage: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_experts: 10,
            top_k: 5,
            prototypes_per_expert: 16,
            feature_dim: 32,
            hidden_dim: 32,
            classes: 6,
            pixels: 64,
            eta: 0.1,
            tau: 1.0,
            epsilon: 1e-8,
            lambda_lb: 0.01,
            lambda_frl: 1e-4,
            learning_rate: 3e-4,
            adam_betas: (0.9, 0.999),
            weight_decay: 1e-4,
            batch_size: 32,
            steps: 1000,
            seed: 0,
            router_kind: RouterKind::MoeRm,
            frl_update: FrlUpdateMode::Batched,
            projection: ProjectionKind::Random,
            differentiate_aggregation: false,
            frl_shrinkage: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MoeError::Config(m));
        if self.n_experts == 0 {
            return bad("n_experts must be at least 1".into());
        }
        if self.top_k == 0 || self.top_k > self.n_experts {
            return bad(format!("top_k must satisfy 1 <= top_k <= n_experts ({}), got {}", self.n_experts, self.top_k));
        }
        if self.prototypes_per_expert == 0 {
            return bad("prototypes_per_expert must be at least 1".into());
        }
        if self.feature_dim < 2 || self.hidden_dim == 0 || self.pixels == 0 {
            return bad(format!(
                "need feature_dim >= 2, hidden_dim >= 1, pixels >= 1 (got {}, {}, {})",
                self.feature_dim, self.hidden_dim, self.pixels
            ));
        }
        if self.classes < 2 || self.classes > 256 {
            return bad(format!("classes must lie in [2, 256], got {}", self.classes));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.lambda_lb >= 0.0) || !(self.lambda_frl >= 0.0) {
            return bad(format!("loss weights must be nonnegative, got ({}, {})", self.lambda_lb, self.lambda_frl));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be nonnegative, got {}", self.learning_rate));
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return bad(format!("adam betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight decay must be nonnegative, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.projection == ProjectionKind::Identity && self.hidden_dim != self.feature_dim {
            return bad("identity projection needs hidden_dim == feature_dim".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            lr: self.learning_rate,
            beta1: self.adam_betas.0,
            beta2: self.adam_betas.1,
            weight_decay: self.weight_decay,
            eps: 1e-8,
        }
    }

    pub fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        for (what, want, got) in [
            ("feature dimension", self.feature_dim, dataset.dim),
            ("pixel count", self.pixels, dataset.pixels),
            ("class count", self.classes, dataset.classes),
        ] {
            if want != got {
                return Err(MoeError::Dimension(format!("{what}: model expects {want}, dataset has {got}")));
            }
        }
        Ok(())
    }
}

/// Named, independent random streams derived from one root seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum RngStream {
    DataOrder = 1,
    ExpertInit = 2,
    PrototypeInit = 3,
    ProjectionInit = 4,
    GateInit = 5,
}

pub fn rng_stream(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub experts: Vec<ExpertParams>,
    pub libraries: Vec<FeatureRetrievalLibrary>,
    pub projections: Vec<Projection>,
    pub gate: Option<LinearGate>,
    pub moments: AdamMoments,
    pub step: u64,
}

/// Everything computed for one sample in the forward pass.
#[derive(Debug, Clone)]
pub struct SampleForward {
    pub query: DiscreteDistribution,
    /// `attention[j]` over expert `j`'s prototypes.
    pub attention: Vec<Vec<f64>>,
    pub decision: RoutingDecision,
    pub weights: AggregationWeights,
    /// Intermediate and logits of each selected expert, in `decision.selected` order.
    pub routed: Vec<(Vec<f64>, Vec<f64>)>,
    /// Distribution each selected expert's divergence was measured against.
    pub routed_dists: Vec<DiscreteDistribution>,
    pub logits: Vec<f64>,
}

impl SampleForward {
    pub fn predicted_labels(&self, classes: usize) -> Vec<u8> {
        self.logits
            .chunks_exact(classes)
            .map(|row| crate::router::argmax(row) as u8)
            .collect()
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub loss: LossBreakdown,
    /// Entropy (nats) of the batch-mean routing probabilities.
    pub routing_entropy: f64,
    pub selection_counts: Vec<u64>,
}

/// Optional data-parallel execution of per-sample work. Results are
/// gathered in sample order, so parallel and sequential runs match bit for bit.
#[derive(Default)]
pub struct Executor {
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub fn sequential() -> Self {
        Self { pool: None }
    }

    pub fn with_threads(threads: usize) -> Self {
        if threads <= 1 {
            return Self::sequential();
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok();
        Self { pool }
    }

    /// Reads `MRAM_THREADS`; unset or unparsable means sequential.
    pub fn from_env() -> Self {
        let threads = std::env::var("MRAM_THREADS").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(1);
        Self::with_threads(threads)
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).map(f).collect(),
        }
    }
}

impl TrainState {
    pub fn init(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_experts;
        let mut expert_rng = rng_stream(config.seed, RngStream::ExpertInit);
        let experts: Vec<ExpertParams> = (0..n)
            .map(|_| ExpertParams::random(config.feature_dim, config.hidden_dim, config.pixels, config.classes, &mut expert_rng))
            .collect();
        let mut proto_rng = rng_stream(config.seed, RngStream::PrototypeInit);
        let libraries = (0..n)
            .map(|_| FeatureRetrievalLibrary::random(config.prototypes_per_expert, config.feature_dim, &mut proto_rng))
            .collect::<Result<Vec<_>>>()?;
        let mut proj_rng = rng_stream(config.seed, RngStream::ProjectionInit);
        let projections = (0..n)
            .map(|_| match config.projection {
                ProjectionKind::Random => Projection::random(config.hidden_dim, config.feature_dim, &mut proj_rng),
                ProjectionKind::Identity => Projection::identity(config.feature_dim),
            })
            .collect();
        let gate = config
            .router_kind
            .uses_gate()
            .then(|| LinearGate::random(n, config.feature_dim, &mut rng_stream(config.seed, RngStream::GateInit)));
        let mut state = Self { experts, libraries, projections, gate, moments: AdamMoments { m: vec![], v: vec![] }, step: 0 };
        state.moments = AdamMoments::zeros_for(state.param_tensors().iter().map(|t| t.len()));
        Ok(state)
    }

    /// Trainable tensors in optimizer order: each expert's four tensors,
    /// then the gate weights and biases when present.
    pub fn param_tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.experts.iter().flat_map(|e| e.tensors()).collect();
        if let Some(g) = &self.gate {
            out.push(&g.weights);
            out.push(&g.biases);
        }
        out
    }

    fn param_tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = self.experts.iter_mut().flat_map(|e| e.tensors_mut()).collect();
        if let Some(g) = &mut self.gate {
            out.push(&mut g.weights);
            out.push(&mut g.biases);
        }
        out
    }

    /// Checks that the state's shapes agree with `config`.
    pub fn check_config(&self, config: &TrainConfig) -> Result<()> {
        ensure_dim(config.n_experts, self.experts.len(), "expert count")?;
        ensure_dim(config.n_experts, self.libraries.len(), "library count")?;
        ensure_dim(config.n_experts, self.projections.len(), "projection count")?;
        for e in &self.experts {
            ensure_dim(config.feature_dim, e.dim, "expert feature dimension")?;
            ensure_dim(config.hidden_dim, e.hidden, "expert hidden dimension")?;
            ensure_dim(config.pixels, e.pixels, "expert pixel count")?;
            ensure_dim(config.classes, e.classes, "expert class count")?;
            e.validate()?;
        }
        for l in &self.libraries {
            ensure_dim(config.feature_dim, l.dim(), "library dimension")?;
        }
        if config.router_kind.uses_gate() != self.gate.is_some() {
            return Err(MoeError::Config("gate parameters present iff a learned-gate router is configured".into()));
        }
        let lens: Vec<usize> = self.param_tensors().iter().map(|t| t.len()).collect();
        ensure_dim(lens.len(), self.moments.m.len(), "first moment tensors")?;
        ensure_dim(lens.len(), self.moments.v.len(), "second moment tensors")?;
        for ((l, m), v) in lens.iter().zip(&self.moments.m).zip(&self.moments.v) {
            ensure_dim(*l, m.len(), "first moment")?;
            ensure_dim(*l, v.len(), "second moment")?;
        }
        Ok(())
    }

    /// Retrieval, routing, sparse expert execution and aggregation for one
    /// feature. Libraries are only read.
    pub fn forward(&self, feature: &[f64], config: &TrainConfig) -> Result<SampleForward> {
        ensure_dim(config.feature_dim, feature.len(), "sample feature")?;
        let query = normalize(feature)?;
        let attention = self.libraries.iter().map(|l| l.attend(feature)).collect::<Result<Vec<_>>>()?;

        let decision = match config.router_kind {
            RouterKind::MoeRm => {
                let protos = self
                    .libraries
                    .iter()
                    .zip(&attention)
                    .map(|(l, a)| normalize(&l.retrieve(a)?))
                    .collect::<Result<Vec<_>>>()?;
                route(&query, &protos, config.epsilon, config.tau, config.top_k)?
            }
            RouterKind::LinearGate | RouterKind::SoftAll => {
                let gate = self.gate.as_ref().ok_or_else(|| MoeError::Config("learned-gate router without gate parameters".into()))?;
                let scores = gate.logits(feature)?;
                let probs = softmax(&scores);
                let selected = if config.router_kind == RouterKind::SoftAll {
                    (0..config.n_experts).collect()
                } else {
                    top_k_select(&probs, config.top_k)?
                };
                RoutingDecision { scores, probs, selected }
            }
        };

        let mut routed = Vec::with_capacity(decision.selected.len());
        let mut routed_dists = Vec::with_capacity(decision.selected.len());
        for &j in &decision.selected {
            let out = self.experts[j].forward(feature)?;
            routed_dists.push(normalize(&distribution_logits(&out.intermediate, config.feature_dim, &self.projections[j])?)?);
            routed.push((out.intermediate, out.logits));
        }

        let weights = match config.router_kind {
            RouterKind::MoeRm => {
                let pairs: Vec<(usize, DiscreteDistribution)> =
                    decision.selected.iter().copied().zip(routed_dists.iter().cloned()).collect();
                aggregation_weights(&query, &pairs, config.epsilon)?
            }
            _ => {
                let mass: f64 = decision.selected.iter().map(|&j| decision.probs[j]).sum();
                let beta = decision.selected.iter().map(|&j| decision.probs[j] / mass).collect();
                AggregationWeights::from_weights(decision.selected.clone(), beta)?
            }
        };

        let outputs: Vec<(usize, &[f64])> =
            decision.selected.iter().copied().zip(routed.iter().map(|r| r.1.as_slice())).collect();
        let logits = aggregate(&weights, &outputs)?;
        Ok(SampleForward { query, attention, decision, weights, routed, routed_dists, logits })
    }
}

/// Gradient contribution of one sample, reduced afterwards in sample order.
struct SampleGrad {
    ce: f64,
    /// `(expert, dL/dlogits scaled by β, dL/dh)` for each routed expert.
    experts: Vec<(usize, Vec<f64>, Option<Vec<f64>>)>,
    /// `dL/dβ` for the learned gate, aligned with the selection.
    gate: Option<Vec<f64>>,
}

fn sample_grad(state: &TrainState, fwd: &SampleForward, sample: &Sample, config: &TrainConfig) -> Result<SampleGrad> {
    let (ce, grad) = cross_entropy_with_grad(&fwd.logits, &sample.labels, config.classes)?;
    let dloss_dbeta: Vec<f64> =
        fwd.routed.iter().map(|(_, y)| y.iter().zip(&grad).map(|(a, b)| a * b).sum()).collect();

    let divergence_grad = (config.differentiate_aggregation && config.router_kind == RouterKind::MoeRm)
        .then(|| fwd.weights.divergence_grad(&dloss_dbeta));

    let mut experts = Vec::with_capacity(fwd.decision.selected.len());
    for (slot, &j) in fwd.decision.selected.iter().enumerate() {
        let beta = fwd.weights.weights[slot];
        let logit_grad: Vec<f64> = grad.iter().map(|g| beta * g).collect();
        let hidden_grad = divergence_grad.as_ref().map(|dd| {
            // δ = JS(Q, softmax(u)), u = h or ψ h
            let r = fwd.routed_dists[slot].probs();
            let c = js_grad_wrt_second(fwd.query.probs(), r);
            let mean: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
            let du: Vec<f64> = r.iter().zip(&c).map(|(rk, ck)| dd[slot] * rk * (ck - mean)).collect();
            if config.hidden_dim == config.feature_dim {
                du
            } else {
                state.projections[j].apply_transpose(&du)
            }
        });
        experts.push((j, logit_grad, hidden_grad));
    }
    let gate = config.router_kind.uses_gate().then_some(dloss_dbeta);
    Ok(SampleGrad { ce, experts, gate })
}

/// One training step on `batch`. Returns the loss breakdown and diagnostics
/// and advances `state.step` by one.
pub fn train_step_with(
    state: &mut TrainState,
    batch: &[&Sample],
    config: &TrainConfig,
    exec: &Executor,
) -> Result<StepRecord> {
    if batch.is_empty() {
        return Err(MoeError::InvalidInput("empty batch".into()));
    }
    for s in batch {
        ensure_dim(config.feature_dim, s.feature.len(), "sample feature")?;
        ensure_dim(config.pixels, s.labels.len(), "sample labels")?;
    }
    let b = batch.len();
    let frozen: &TrainState = state;

    // steps 1-4: retrieval, routing, sparse experts, aggregation
    let per_sample = exec.map(b, |i| -> Result<(SampleForward, SampleGrad, Vec<Vec<f64>>)> {
        let feature = batch[i].feature_f64();
        let fwd = frozen.forward(&feature, config)?;
        let grad = sample_grad(frozen, &fwd, batch[i], config)?;
        // every expert's projected intermediate feeds its library update
        let projected = (0..config.n_experts)
            .map(|j| {
                let h = match fwd.decision.selected.iter().position(|&s| s == j) {
                    Some(slot) => fwd.routed[slot].0.clone(),
                    None => frozen.experts[j].encode(&feature)?,
                };
                frozen.projections[j].project(&h)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((fwd, grad, projected))
    });
    let per_sample = per_sample.into_iter().collect::<Result<Vec<_>>>()?;

    // step 5: losses
    let ce = per_sample.iter().map(|(_, g, _)| g.ce).sum::<f64>() / b as f64;
    let probs: Vec<Vec<f64>> = per_sample.iter().map(|(f, _, _)| f.decision.probs.clone()).collect();
    let usage = expert_usage(&probs)?;
    let lb = load_balance_from_usage(&usage);
    let attention_by_expert: Vec<Vec<Vec<f64>>> = (0..config.n_experts)
        .map(|j| per_sample.iter().map(|(f, _, _)| f.attention[j].clone()).collect())
        .collect();
    let frl = frl_regularizer(&state.libraries, &attention_by_expert)?;
    let loss = total_loss(ce, lb, frl, config.lambda_lb, config.lambda_frl)?;

    let mut selection_counts = vec![0u64; config.n_experts];
    for (f, _, _) in &per_sample {
        for &j in &f.decision.selected {
            selection_counts[j] += 1;
        }
    }
    let routing_entropy = -usage.iter().map(|&u| if u > 0.0 { u * u.ln() } else { 0.0 }).sum::<f64>();

    // gradient reduction in sample order; CE is a batch mean
    let scale = 1.0 / b as f64;
    let mut expert_grads: Vec<ExpertParams> = state.experts.iter().map(ExpertParams::zeros_like).collect();
    let mut gate_grads = state.gate.as_ref().map(|g| (vec![0.0; g.weights.len()], vec![0.0; g.biases.len()]));
    for (sample, (fwd, grad, _)) in batch.iter().zip(&per_sample) {
        let feature = sample.feature_f64();
        for (j, logit_grad, hidden_grad) in &grad.experts {
            state.experts[*j].backward_into(&feature, logit_grad, hidden_grad.as_deref(), scale, &mut expert_grads[*j])?;
        }
        if let (Some(gate), Some(dbeta), Some((gw, gb))) = (&state.gate, &grad.gate, &mut gate_grads) {
            let scaled: Vec<f64> = dbeta.iter().map(|d| d * scale).collect();
            gate.accumulate_grad(&feature, &fwd.decision.selected, &fwd.weights.weights, &scaled, gw, gb);
        }
    }

    // step 6: FRL read-then-update
    for (j, lib) in state.libraries.iter_mut().enumerate() {
        let weights = &attention_by_expert[j];
        let projected: Vec<Vec<f64>> = per_sample.iter().map(|(_, _, p)| p[j].clone()).collect();
        match config.frl_update {
            FrlUpdateMode::Batched => lib.read_then_update(weights, &projected, config.eta)?,
            FrlUpdateMode::Sequential => lib.read_then_update_sequential(weights, &projected, config.eta)?,
        }
        if config.frl_shrinkage {
            lib.shrink(1.0 - config.learning_rate * config.lambda_frl);
        }
    }

    // step 7: optimizer
    let mut grads: Vec<Vec<f64>> = expert_grads
        .into_iter()
        .flat_map(|g| [g.enc_w, g.enc_b, g.head_w, g.head_b])
        .collect();
    if let Some((gw, gb)) = gate_grads {
        grads.push(gw);
        grads.push(gb);
    }
    let hyper = config.adam();
    let t = state.step + 1;
    let mut moments = std::mem::take(&mut state.moments);
    ensure_dim(grads.len(), moments.m.len(), "optimizer moments")?;
    ensure_dim(grads.len(), moments.v.len(), "optimizer moments")?;
    for (((param, g), m), v) in
        state.param_tensors_mut().into_iter().zip(&grads).zip(moments.m.iter_mut()).zip(moments.v.iter_mut())
    {
        adam_update(param, g, m, v, t, &hyper)?;
    }
    state.moments = moments;
    state.step = t;

    Ok(StepRecord { step: t, loss, routing_entropy, selection_counts })
}

pub fn train_step(state: &mut TrainState, batch: &[&Sample], config: &TrainConfig) -> Result<StepRecord> {
    train_step_with(state, batch, config, &Executor::sequential())
}

/// Infinite stream of batches drawn from seeded per-epoch shuffles.
pub struct BatchSampler {
    n: usize,
    batch: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, batch: usize, seed: u64) -> Self {
        Self { n, batch, order: Vec::new(), cursor: 0, rng: rng_stream(seed, RngStream::DataOrder) }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch);
        while out.len() < self.batch {
            if self.cursor >= self.order.len() {
                self.order = (0..self.n).collect();
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

pub fn train_with(dataset: &Dataset, config: &TrainConfig, exec: &Executor) -> Result<(TrainState, Vec<StepRecord>)> {
    let state = TrainState::init(config)?;
    train_from(state, dataset, config, exec)
}

/// Continues training `state` for `config.steps` steps.
pub fn train_from(
    mut state: TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
    exec: &Executor,
) -> Result<(TrainState, Vec<StepRecord>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(MoeError::InvalidInput("cannot train on an empty dataset".into()));
    }
    config.check_dataset(dataset)?;
    state.check_config(config)?;
    let mut sampler = BatchSampler::new(dataset.len(), config.batch_size, config.seed);
    let mut history = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let idx = sampler.next_batch();
        let batch: Vec<&Sample> = idx.iter().map(|&i| &dataset.samples[i]).collect();
        history.push(train_step_with(&mut state, &batch, config, exec)?);
    }
    Ok((state, history))
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(TrainState, Vec<StepRecord>)> {
    train_with(dataset, config, &Executor::sequential())
}
