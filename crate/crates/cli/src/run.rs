//! Single runs and certificates.

use std::fs;
use std::path::{Path, PathBuf};

use pbgnet::data::{TaskData, TaskSpec};
use pbgnet::pacbayes::BoundReport;
use pbgnet::train::{bound_report, evaluate, history_to_jsonl, train, Checkpoint, Example, Model};

use crate::config::{ExperimentConfig, RunRecord};
use crate::error::{CliError, CliResult};

pub const RUN_FILE: &str = "run.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.jsonl";

pub fn load_task(name: &str, data_dir: &Path, seed: u64) -> CliResult<(TaskSpec, TaskData)> {
    let spec = TaskSpec::from_name(name).map_err(|e| CliError::Usage(e.to_string()))?;
    let task = spec.load(data_dir, seed)?;
    Ok((spec, task))
}

pub fn train_examples(task: &TaskData) -> Vec<Example<'_>> {
    task.train().iter().collect()
}

pub fn test_examples(task: &TaskData) -> Vec<Example<'_>> {
    task.test().iter().collect()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Loads the task and runs [`run_on_task`].
pub fn cmd_train(
    config: &ExperimentConfig,
    data_dir: &Path,
    out_dir: &Path,
) -> CliResult<RunRecord> {
    config.validate()?;
    let (spec, task) = load_task(&config.task, data_dir, config.seed)?;
    run_on_task(config, &spec, &task, out_dir)
}

/// Trains on the task's training split, evaluates on its test split and
/// writes checkpoint, history and run record into `out_dir`.
pub fn run_on_task(
    config: &ExperimentConfig,
    spec: &TaskSpec,
    task: &TaskData,
    out_dir: &Path,
) -> CliResult<RunRecord> {
    config.validate()?;
    let tc = config.train_config();
    let train_ex = train_examples(task);
    let outcome = train(&tc, &train_ex)?;
    let test = evaluate(
        &outcome.model,
        &test_examples(task),
        tc.mode,
        tc.seed,
        tc.repetitions(),
    )?;

    fs::create_dir_all(out_dir)?;
    let checkpoint_path = out_dir.join(CHECKPOINT_FILE);
    let history_path = out_dir.join(HISTORY_FILE);
    Checkpoint::from_outcome(&tc, Some(spec.clone()), &outcome).save(&checkpoint_path)?;
    fs::write(&history_path, history_to_jsonl(&outcome.history)?)?;

    let record = RunRecord {
        config: config.clone(),
        train: outcome.train_metrics,
        test,
        valid: outcome.valid_metrics,
        bound: outcome.bound,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.epochs_run,
        c: outcome.gamma.map(f64::exp),
        final_lr: outcome.final_lr,
        history_path: history_path.display().to_string(),
        checkpoint_path: checkpoint_path.display().to_string(),
    };
    write_json(&out_dir.join(RUN_FILE), &record)?;
    Ok(record)
}

#[derive(Clone, Debug, Default)]
pub struct CertifyOptions {
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub multiplicity: Option<usize>,
}

/// Recomputes the certificate of a checkpoint on its bound rows, averaging
/// over the configured inference repetitions when sampled.
pub fn cmd_certify(
    checkpoint: &Path,
    data_dir: &Path,
    opts: &CertifyOptions,
) -> CliResult<BoundReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let spec = ck
        .task
        .clone()
        .ok_or_else(|| CliError::Usage("checkpoint has no task".into()))?;
    let task = spec.load(data_dir, ck.config.seed)?;
    certify_on_task(&ck, &task, opts)
}

pub fn certify_on_task(
    ck: &Checkpoint,
    task: &TaskData,
    opts: &CertifyOptions,
) -> CliResult<BoundReport> {
    ck.check_input_dim(task.dim)?;
    let (Model::Bam { params }, Some(prior)) = (&ck.model, &ck.prior) else {
        return Err(CliError::Usage(format!(
            "{} checkpoints carry no certificate",
            ck.config.method.name()
        )));
    };
    let train_ex = train_examples(task);
    if let Some(&i) = ck.bound_indices.iter().find(|&&i| i >= train_ex.len()) {
        return Err(pbgnet::Error::Data(format!(
            "bound row {i} outside a training split of {}",
            train_ex.len()
        ))
        .into());
    }
    let rows: Vec<Example<'_>> = ck.bound_indices.iter().map(|&i| train_ex[i]).collect();
    Ok(bound_report(
        params,
        prior,
        &rows,
        ck.config.mode,
        opts.seed.unwrap_or(ck.config.seed),
        ck.config.repetitions(),
        opts.delta.unwrap_or(ck.config.delta),
        opts.multiplicity.unwrap_or(ck.config.multiplicity),
        Some(ck.best_epoch),
    )?)
}

pub fn run_dir(out_dir: &Path, index: usize) -> PathBuf {
    out_dir.join(format!("cell-{index:03}"))
}
