//! Trains the statistic-augmented MoE and a single-expert baseline on a
//! three-scenario synthetic task and prints test metrics and routing purity.
//!
//! cargo run --release -p moe-ram --example synthetic_benchmark [seed] [steps]

use moe_ram::data::ScenarioFamily;
use moe_ram::eval::evaluate;
use moe_ram::trainer::{train, TrainConfig, TrainState};

fn main() -> moe_ram::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);

    let family = ScenarioFamily { per_scenario: 400, ..ScenarioFamily::default() };
    let data = family.generate(seed)?;
    let (test, train_set) = data.split_per_scenario(100, seed);

    let moe = TrainConfig { n_experts: 5, top_k: 2, prototypes_per_expert: 8, steps, seed, ..TrainConfig::default() };
    let single = TrainConfig { n_experts: 1, top_k: 1, ..moe.clone() };

    for (name, config) in [("moe-ram", &moe), ("single", &single)] {
        let start = std::time::Instant::now();
        let initial = evaluate(&TrainState::init(config)?, config, &train_set)?;
        let (state, history) = train(&train_set, config)?;
        let train_eval = evaluate(&state, config, &train_set)?;
        let test_eval = evaluate(&state, config, &test)?;
        println!(
            "{name:8} test mIoU {:.4} mF1 {:.4} | train CE {:.4} -> {:.4} (batch {:.4} -> {:.4}) | purity {:.3} {:?} | top1 {:?} | {:.1}s",
            test_eval.metrics.miou,
            test_eval.metrics.mf1,
            initial.mean_ce,
            train_eval.mean_ce,
            history.first().map(|h| h.loss.ce).unwrap_or(f64::NAN),
            history.last().map(|h| h.loss.ce).unwrap_or(f64::NAN),
            test_eval.purity.as_ref().map(|p| p.macro_average).unwrap_or(f64::NAN),
            test_eval.purity.as_ref().map(|p| p.per_scenario.iter().map(|s| (s.modal_expert, s.purity)).collect::<Vec<_>>()),
            test_eval.top1_histogram,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
