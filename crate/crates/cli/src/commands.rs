use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use moe_ram::data::{load_dataset, save_dataset, Dataset, ScenarioFamily};
use moe_ram::eval::evaluate_with;
use moe_ram::frl::format_dump;
use moe_ram::trainer::checkpoint::{load_checkpoint, save_checkpoint};
use moe_ram::trainer::{train_with, Executor, TrainConfig, TrainState};
use sha2::{Digest, Sha256};

use crate::report::{format_log, training_selections, RunReport, CHECKPOINT_FILE, LOG_FILE, REPORT_FILE};
use crate::{json, CliError, Command, CompareArgs, EvalArgs, GenDataArgs, InspectArgs, TrainArgs};

type Result<T> = std::result::Result<T, CliError>;

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::InspectFrl(a) => inspect_frl(a),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    load_dataset(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn save_with_digest(dataset: &Dataset, path: &Path) -> Result<()> {
    save_dataset(dataset, path).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    let bytes = std::fs::read(path)?;
    println!("{}  {}", sha256_hex(&bytes), path.display());
    Ok(())
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let family = ScenarioFamily {
        scenarios: a.scenarios,
        per_scenario: a.per_scenario + a.holdout,
        dim: a.dim,
        pixels: a.pixels,
        classes: a.classes,
        ..ScenarioFamily::default()
    };
    let dataset = family.generate(a.seed)?;
    match &a.holdout_out {
        Some(holdout_path) if a.holdout > 0 => {
            let (held, rest) = dataset.split_per_scenario(a.holdout, a.seed);
            save_with_digest(&rest, &a.out)?;
            save_with_digest(&held, holdout_path)
        }
        _ => save_with_digest(&dataset, &a.out),
    }
}

fn train(a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let bytes = std::fs::read(&a.data).map_err(|e| CliError::data(format!("{}: {e}", a.data.display())))?;
    let dataset = Dataset::from_bytes(&bytes).map_err(|e| CliError::data(format!("{}: {e}", a.data.display())))?;
    let config = a.model.config(a.router, a.seed, dataset.dim, dataset.pixels, dataset.classes);
    config.validate()?;

    let exec = Executor::from_env();
    let (state, history) = train_with(&dataset, &config, &exec)?;
    let evaluation = evaluate_with(&state, &config, &dataset, &exec)?;

    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", a.out_dir.display())))?;
    save_checkpoint(a.out_dir.join(CHECKPOINT_FILE), &state, &config)?;
    write(&a.out_dir.join(LOG_FILE), format_log(&history, config.n_experts))?;
    let report = RunReport {
        router: config.router_kind.cli_name().to_string(),
        data_sha256: sha256_hex(&bytes),
        samples: dataset.len(),
        steps: state.step,
        final_evaluation: evaluation,
        training_selection_histogram: training_selections(&history, config.n_experts),
        loss_history: LOG_FILE.into(),
        checkpoint: CHECKPOINT_FILE.into(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        config,
    };
    let text = json::to_string(&report).map_err(|e| CliError::data(e.to_string()))?;
    write(&a.out_dir.join(REPORT_FILE), &text)?;
    println!(
        "trained {} for {} steps: mIoU {:.6}, final CE {:.6}; wrote {}",
        report.router,
        report.steps,
        report.final_evaluation.metrics.miou,
        report.final_evaluation.mean_ce,
        a.out_dir.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<(TrainConfig, TrainState)> {
    load_checkpoint(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

#[derive(serde::Serialize)]
struct EvalOutput {
    router: String,
    checkpoint_step: u64,
    samples: usize,
    #[serde(flatten)]
    evaluation: moe_ram::eval::EvalReport,
}

fn eval(a: &EvalArgs) -> Result<()> {
    let (config, state) = load_model(&a.checkpoint)?;
    let dataset = read_dataset(&a.data)?;
    config.check_dataset(&dataset).map_err(|e| {
        CliError::data(format!("checkpoint {} does not fit dataset {}: {e}", a.checkpoint.display(), a.data.display()))
    })?;
    let evaluation = evaluate_with(&state, &config, &dataset, &Executor::from_env())?;
    let out = EvalOutput {
        router: config.router_kind.cli_name().to_string(),
        checkpoint_step: state.step,
        samples: dataset.len(),
        evaluation,
    };
    emit(a.out.as_deref(), &json::to_string(&out).map_err(|e| CliError::data(e.to_string()))?)
}

fn compare(a: &CompareArgs) -> Result<()> {
    if a.routers.is_empty() || a.seeds.is_empty() {
        return Err(CliError::usage("compare needs at least one router and one seed"));
    }
    let train_set = read_dataset(&a.data)?;
    let test_set = match &a.eval_data {
        Some(p) => read_dataset(p)?,
        None => train_set.clone(),
    };
    let exec = Executor::from_env();
    let mut csv = String::from("router,seed,miou,mf1,mpre,mrec\n");
    for &router in &a.routers {
        for &seed in &a.seeds {
            let config = a.model.config(router, seed, train_set.dim, train_set.pixels, train_set.classes);
            config.validate()?;
            let (state, _) = train_with(&train_set, &config, &exec)?;
            let m = evaluate_with(&state, &config, &test_set, &exec)?.metrics;
            let row = format!("{},{seed},{:.6},{:.6},{:.6},{:.6}\n", router.cli_name(), m.miou, m.mf1, m.mpre, m.mrec);
            eprint!("{row}");
            csv.push_str(&row);
        }
    }
    emit(a.out.as_deref(), &csv)
}

fn inspect_frl(a: &InspectArgs) -> Result<()> {
    let (config, state) = load_model(&a.checkpoint)?;
    emit(a.out.as_deref(), &format_dump(&state.libraries))?;
    let (Some(data), Some(features_out)) = (&a.with_features, &a.features_out) else {
        return Ok(());
    };
    let dataset = read_dataset(data)?;
    config.check_dataset(&dataset)?;
    let exec = Executor::from_env();
    let rows = exec.map(dataset.len(), |i| -> moe_ram::Result<String> {
        let sample = &dataset.samples[i];
        let feature = sample.feature_f64();
        let expert = state.forward(&feature, &config)?.decision.top1();
        let projected = state.projections[expert].project(&state.experts[expert].encode(&feature)?)?;
        let mut row = format!("{i},{},{expert}", sample.scenario_id.map(|s| s.to_string()).unwrap_or_default());
        for x in projected {
            let _ = write!(row, ",{x:.6}");
        }
        row.push('\n');
        Ok(row)
    });
    let mut table = String::new();
    for row in rows {
        table.push_str(&row?);
    }
    write(features_out, table)
}
