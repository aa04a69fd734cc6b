//! Run report written next to every checkpoint.

use moe_ram::eval::EvalReport;
use moe_ram::trainer::{StepRecord, TrainConfig};
use serde::Serialize;

pub const CHECKPOINT_FILE: &str = "checkpoint.mram";
pub const LOG_FILE: &str = "train_log.csv";
pub const REPORT_FILE: &str = "report.json";

/// Field order is fixed; `wall_clock_seconds` is always last.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub router: String,
    pub config: TrainConfig,
    pub data_sha256: String,
    pub samples: usize,
    pub steps: u64,
    /// Evaluation of the final state on the training set.
    pub final_evaluation: EvalReport,
    /// Expert selections summed over all training steps.
    pub training_selection_histogram: Vec<u64>,
    pub loss_history: String,
    pub checkpoint: String,
    pub wall_clock_seconds: f64,
}

pub fn log_header(n_experts: usize) -> String {
    let mut h = String::from("step,ce,lb,frl,total,routing_entropy");
    for j in 0..n_experts {
        h.push_str(&format!(",sel_{j}"));
    }
    h
}

/// CSV step log. Floats use the shortest representation that round-trips.
pub fn format_log(history: &[StepRecord], n_experts: usize) -> String {
    let mut out = log_header(n_experts);
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?}",
            r.step, r.loss.ce, r.loss.lb, r.loss.frl, r.loss.total, r.routing_entropy
        ));
        for c in &r.selection_counts {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    out
}

pub fn training_selections(history: &[StepRecord], n_experts: usize) -> Vec<u64> {
    let mut total = vec![0u64; n_experts];
    for r in history {
        for (t, c) in total.iter_mut().zip(&r.selection_counts) {
            *t += c;
        }
    }
    total
}
