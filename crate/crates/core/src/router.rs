//! Expert routing.
//!
//! The statistic-augmented router scores experts by the reciprocal of the JS
//! divergence between the query distribution and each expert's retrieved
//! prototype distribution, then applies a temperature softmax and TopK. A
//! learned linear gate is provided as the comparison baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, MoeError, Result};
use crate::stats::{js_divergence, softmax, DiscreteDistribution};

/// Which gate drives expert selection and aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterKind {
    /// JS-divergence retrieval routing with reciprocal-distance aggregation.
    MoeRm,
    /// Learned affine gate, TopK, aggregation by renormalized gate probabilities.
    LinearGate,
    /// Learned affine gate over all experts, aggregation by gate probabilities.
    SoftAll,
}

impl RouterKind {
    /// Short name used on the command line and in reports.
    pub fn cli_name(self) -> &'static str {
        match self {
            RouterKind::MoeRm => "moe-rm",
            RouterKind::LinearGate => "linear",
            RouterKind::SoftAll => "soft",
        }
    }

    pub fn from_cli_name(name: &str) -> Option<Self> {
        match name {
            "moe-rm" => Some(RouterKind::MoeRm),
            "linear" => Some(RouterKind::LinearGate),
            "soft" => Some(RouterKind::SoftAll),
            _ => None,
        }
    }

    pub fn uses_gate(self) -> bool {
        !matches!(self, RouterKind::MoeRm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
    /// Selected expert indices in ascending order.
    pub selected: Vec<usize>,
}

impl RoutingDecision {
    /// Index of the most probable expert (lowest index on ties).
    pub fn top1(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `s_j = 1 / (ε + JS(query, proto_j))`.
pub fn routing_scores(
    query_dist: &DiscreteDistribution,
    proto_dists: &[DiscreteDistribution],
    epsilon: f64,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(MoeError::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    proto_dists
        .iter()
        .map(|p| js_divergence(query_dist, p).map(|js| 1.0 / (epsilon + js)))
        .collect()
}

/// Softmax of `τ · s` over experts.
pub fn routing_probs(scores: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(MoeError::Config(format!("temperature tau must be positive, got {tau}")));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(MoeError::InvalidInput(format!("routing score {bad} is not finite")));
    }
    let scaled: Vec<f64> = scores.iter().map(|s| tau * s).collect();
    Ok(softmax(&scaled))
}

/// Indices of the `k` largest probabilities, ties to the lower index,
/// returned in ascending order.
pub fn top_k_select(probs: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > probs.len() {
        return Err(MoeError::Config(format!("top-k must lie in [1, {}], got {k}", probs.len())));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    // stable sort keeps lower indices first among equal probabilities
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut selected = order[..k].to_vec();
    selected.sort_unstable();
    Ok(selected)
}

/// Full statistic-augmented routing for one sample.
pub fn route(
    query_dist: &DiscreteDistribution,
    proto_dists: &[DiscreteDistribution],
    epsilon: f64,
    tau: f64,
    top_k: usize,
) -> Result<RoutingDecision> {
    let scores = routing_scores(query_dist, proto_dists, epsilon)?;
    let probs = routing_probs(&scores, tau)?;
    let selected = top_k_select(&probs, top_k)?;
    Ok(RoutingDecision { scores, probs, selected })
}

/// Affine gate `softmax(W x + b)` used by the baseline routers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGate {
    pub n_experts: usize,
    pub dim: usize,
    /// Row-major `n_experts × dim`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LinearGate {
    pub fn zeros(n_experts: usize, dim: usize) -> Self {
        Self { n_experts, dim, weights: vec![0.0; n_experts * dim], biases: vec![0.0; n_experts] }
    }

    /// Uniform in `±1/√dim`.
    pub fn random<R: Rng + ?Sized>(n_experts: usize, dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        let weights = (0..n_experts * dim).map(|_| rng.random_range(-bound..=bound)).collect();
        let biases = (0..n_experts).map(|_| rng.random_range(-bound..=bound)).collect();
        Self { n_experts, dim, weights, biases }
    }

    pub fn logits(&self, feature: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim, feature.len(), "gate feature")?;
        ensure_dim(self.n_experts * self.dim, self.weights.len(), "gate weights")?;
        ensure_dim(self.n_experts, self.biases.len(), "gate biases")?;
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(feature).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect())
    }

    /// Gate probabilities for one feature.
    pub fn forward(&self, feature: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(feature)?))
    }

    /// Accumulates the gradient of the loss into `(grad_w, grad_b)`, given
    /// the aggregation weights over `selected` (gate probabilities
    /// renormalized over the selection) and `dL/dβ_j` for each selected expert.
    pub fn accumulate_grad(
        &self,
        feature: &[f64],
        selected: &[usize],
        beta: &[f64],
        dloss_dbeta: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) {
        let mean: f64 = beta.iter().zip(dloss_dbeta).map(|(b, a)| b * a).sum();
        for ((&j, &b), &a) in selected.iter().zip(beta).zip(dloss_dbeta) {
            let dz = b * (a - mean);
            grad_b[j] += dz;
            for (g, x) in grad_w[j * self.dim..(j + 1) * self.dim].iter_mut().zip(feature) {
                *g += dz * x;
            }
        }
    }
}

/// Shorthand for the baseline gate: probabilities plus TopK.
pub fn baseline_linear_gate(feature: &[f64], gate: &LinearGate, top_k: usize) -> Result<RoutingDecision> {
    let scores = gate.logits(feature)?;
    let probs = softmax(&scores);
    let selected = top_k_select(&probs, top_k)?;
    Ok(RoutingDecision { scores, probs, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normalize;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// JS written through entropies, `H(m) − ½(H(q) + H(p))`.
    fn js_entropy_form(q: &[f64], p: &[f64]) -> f64 {
        let h = |v: &[f64]| -v.iter().map(|x| if *x > 0.0 { x * x.ln() } else { 0.0 }).sum::<f64>();
        let m: Vec<f64> = q.iter().zip(p).map(|(a, b)| 0.5 * (a + b)).collect();
        h(&m) - 0.5 * (h(q) + h(p))
    }

    /// Finds `t` with JS([0.95, 0.05], [t, 1 − t]) = target by bisection.
    fn two_bin_with_js(target: f64) -> Vec<f64> {
        let q = [0.95, 0.05];
        let (mut lo, mut hi) = (1e-9, 0.95);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if js_entropy_form(&q, &[mid, 1.0 - mid]) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        vec![lo, 1.0 - lo]
    }

    #[test]
    fn equal_distributions_score_reciprocal_epsilon() {
        let q = normalize(&[0.3, -0.1, 2.0]).unwrap();
        let scores = routing_scores(&q, &[q.clone(), q.clone(), q.clone()], 1e-8).unwrap();
        for s in scores {
            assert!((s - 1e8).abs() / 1e8 < 1e-12);
        }
    }

    #[test]
    fn scores_from_constructed_divergences() {
        let q = DiscreteDistribution::new(vec![0.95, 0.05]).unwrap();
        let p1 = DiscreteDistribution::new(two_bin_with_js(0.1)).unwrap();
        let p2 = DiscreteDistribution::new(two_bin_with_js(0.3)).unwrap();
        let scores = routing_scores(&q, &[p1, p2], 1e-8).unwrap();
        assert!((scores[0] - 10.0).abs() < 1e-5, "{}", scores[0]);
        assert!((scores[1] - 10.0 / 3.0).abs() < 1e-5, "{}", scores[1]);
    }

    #[test]
    fn scores_permute_with_experts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = normalize(&(0..6).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()).unwrap();
        let ps: Vec<_> = (0..4)
            .map(|_| normalize(&(0..6).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()).unwrap())
            .collect();
        let s = routing_scores(&q, &ps, 1e-8).unwrap();
        let perm = [2, 0, 3, 1];
        let permuted: Vec<_> = perm.iter().map(|&i| ps[i].clone()).collect();
        let s2 = routing_scores(&q, &permuted, 1e-8).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(s2[k], s[i]);
        }
    }

    #[test]
    fn bad_epsilon_and_tau() {
        let q = DiscreteDistribution::uniform(2).unwrap();
        assert!(matches!(routing_scores(&q, std::slice::from_ref(&q), 0.0), Err(MoeError::Config(_))));
        assert!(matches!(routing_probs(&[1.0], 0.0), Err(MoeError::Config(_))));
        assert!(matches!(routing_probs(&[1.0], -2.0), Err(MoeError::Config(_))));
    }

    #[test]
    fn probs_cases() {
        let p = routing_probs(&[2.5, 2.5, 2.5, 2.5], 1.0).unwrap();
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-15));
        let p = routing_probs(&[10.0, 10.0 / 3.0], 1.0).unwrap();
        assert!((p[0] - 0.998_728_983_736_918_6).abs() < 1e-12);
        assert!((p[1] - 0.001_271_016_263_081_358).abs() < 1e-12);
        let shifted = routing_probs(&[13.0, 3.0 + 10.0 / 3.0], 1.0).unwrap();
        for (a, b) in p.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn probs_stay_finite_at_huge_scores() {
        let p = routing_probs(&[1e8, 1e8 - 1.0, 3.0], 4.0).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sharpening_with_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let s: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..20.0)).collect();
            let mut last = 0.0;
            for tau in [0.5, 1.0, 2.0, 4.0] {
                let m = routing_probs(&s, tau).unwrap().into_iter().fold(0.0, f64::max);
                assert!(m >= last - 1e-15);
                last = m;
            }
        }
    }

    #[test]
    fn top_k_cases() {
        assert_eq!(top_k_select(&[0.4, 0.4, 0.2], 1).unwrap(), vec![0]);
        assert_eq!(top_k_select(&[0.2, 0.3, 0.5], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(top_k_select(&[0.1, 0.5, 0.4], 2).unwrap(), vec![1, 2]);
        assert_eq!(top_k_select(&[0.25; 4], 2).unwrap(), vec![0, 1]);
        assert!(matches!(top_k_select(&[0.5, 0.5], 0), Err(MoeError::Config(_))));
        assert!(matches!(top_k_select(&[0.5, 0.5], 3), Err(MoeError::Config(_))));
    }

    #[test]
    fn linear_gate_cases() {
        let x = [0.3, -1.2, 4.0];
        let p = LinearGate::zeros(4, 3).forward(&x).unwrap();
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let mut g = LinearGate::zeros(3, 3);
        g.weights = [0.2, -0.4, 1.0].repeat(3);
        let p = g.forward(&x).unwrap();
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let a = LinearGate::random(4, 3, &mut ChaCha8Rng::seed_from_u64(5));
        let b = LinearGate::random(4, 3, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
        assert!(matches!(a.forward(&[1.0]), Err(MoeError::Dimension(_))));
    }

    #[test]
    fn gate_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let gate = LinearGate::random(4, 3, &mut rng);
        let x = [0.7, -0.3, 1.1];
        let selected = [1usize, 3];
        // L = Σ β_j a_j for fixed a
        let a = [0.8, -1.5];
        let loss = |g: &LinearGate| {
            let p = g.forward(&x).unwrap();
            let z: f64 = selected.iter().map(|&j| p[j]).sum();
            selected.iter().zip(&a).map(|(&j, av)| p[j] / z * av).sum::<f64>()
        };
        let p = gate.forward(&x).unwrap();
        let z: f64 = selected.iter().map(|&j| p[j]).sum();
        let beta: Vec<f64> = selected.iter().map(|&j| p[j] / z).collect();
        let mut gw = vec![0.0; 12];
        let mut gb = vec![0.0; 4];
        gate.accumulate_grad(&x, &selected, &beta, &a, &mut gw, &mut gb);
        let h = 1e-6;
        for i in 0..12 {
            let mut up = gate.clone();
            let mut dn = gate.clone();
            up.weights[i] += h;
            dn.weights[i] -= h;
            let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
            assert!((fd - gw[i]).abs() < 1e-8, "w{i}: {fd} vs {}", gw[i]);
        }
        for i in 0..4 {
            let mut up = gate.clone();
            let mut dn = gate.clone();
            up.biases[i] += h;
            dn.biases[i] -= h;
            let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
            assert!((fd - gb[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn router_kind_names_round_trip() {
        for k in [RouterKind::MoeRm, RouterKind::LinearGate, RouterKind::SoftAll] {
            assert_eq!(RouterKind::from_cli_name(k.cli_name()), Some(k));
        }
        assert_eq!(RouterKind::from_cli_name("nope"), None);
    }
}
