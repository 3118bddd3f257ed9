//! Re-derives recorded numbers from checkpoints and data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use pbgnet::data::split_indices;
use pbgnet::pacbayes::assemble_bound_report;
use pbgnet::train::{evaluate, Checkpoint, Example, Metrics};

use crate::config::RunRecord;
use crate::error::{CliError, CliResult};
use crate::grid::{select, SelectionReport, REPORT_FILE};
use crate::run::{
    certify_on_task, load_task, read_json, test_examples, train_examples, CertifyOptions, RUN_FILE,
};

/// Absolute tolerance for recomputed values. Runs are deterministic, so
/// any real difference is far above this.
pub const VERIFY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub runs_checked: usize,
    pub values_checked: usize,
    pub mismatches: Vec<String>,
}

impl VerifyReport {
    fn check(&mut self, what: String, recorded: f64, recomputed: f64) {
        self.values_checked += 1;
        let same = recorded == recomputed || (recorded - recomputed).abs() <= VERIFY_TOL;
        if !same {
            self.mismatches.push(format!(
                "{what}: recorded {recorded}, recomputed {recomputed}"
            ));
        }
    }

    fn check_metrics(&mut self, what: &str, recorded: &Metrics, recomputed: &Metrics) {
        self.check(
            format!("{what}.linear_loss"),
            recorded.linear_loss,
            recomputed.linear_loss,
        );
        self.check(
            format!("{what}.zero_one"),
            recorded.zero_one,
            recomputed.zero_one,
        );
    }
}

/// Checks one run record against its checkpoint.
pub fn verify_run(record: &RunRecord, data_dir: &Path, report: &mut VerifyReport) -> CliResult<()> {
    let tag = format!(
        "{}[{}]",
        record.config.method.name(),
        record.checkpoint_path
    );
    let ck = Checkpoint::load(Path::new(&record.checkpoint_path))?;
    let (_, task) = load_task(&record.config.task, data_dir, ck.config.seed)?;
    let tc = &ck.config;
    let train_ex = train_examples(&task);
    let reps = tc.repetitions();
    report.runs_checked += 1;

    let train = evaluate(&ck.model, &train_ex, tc.mode, tc.seed, reps)?;
    report.check_metrics(&format!("{tag} train"), &record.train, &train);
    let test = evaluate(&ck.model, &test_examples(&task), tc.mode, tc.seed, reps)?;
    report.check_metrics(&format!("{tag} test"), &record.test, &test);
    if let Some(valid) = &record.valid {
        let parts = split_indices(train_ex.len(), &[0.8, 0.2], tc.seed, "validation")?;
        let rows: Vec<Example<'_>> = parts[1].iter().map(|&i| train_ex[i]).collect();
        let v = evaluate(&ck.model, &rows, tc.mode, tc.seed, reps)?;
        report.check_metrics(&format!("{tag} valid"), valid, &v);
    }
    if let Some(bound) = &record.bound {
        // from the recorded inputs alone
        let again = assemble_bound_report(bound.inputs(), bound.provenance.clone())?;
        report.check(
            format!("{tag} bound from inputs"),
            bound.seeger_bound,
            again.seeger_bound,
        );
        report.check(
            format!("{tag} catoni from inputs"),
            bound.catoni_bound,
            again.catoni_bound,
        );
        // from the checkpoint and data
        let fresh = certify_on_task(&ck, &task, &CertifyOptions::default())?;
        report.check(format!("{tag} q"), bound.q, fresh.q);
        report.check(format!("{tag} KL"), bound.kl, fresh.kl);
        report.check(format!("{tag} n"), bound.n as f64, fresh.n as f64);
        report.check(
            format!("{tag} bound"),
            bound.seeger_bound,
            fresh.seeger_bound,
        );
    }
    Ok(())
}

/// Verifies a run directory (`run.json`) or a grid directory
/// (`selection.json`, including the selection itself).
pub fn cmd_verify(dir: &Path, data_dir: &Path) -> CliResult<VerifyReport> {
    let mut report = VerifyReport::default();
    let grid = dir.join(REPORT_FILE);
    if grid.is_file() {
        let sel: SelectionReport = read_json(&grid)?;
        for c in &sel.cells {
            if let Some(r) = &c.record {
                verify_run(r, data_dir, &mut report)?;
            }
        }
        let again = select(&sel.cells);
        report.values_checked += 1;
        if again != sel.selections {
            report
                .mismatches
                .push("selection differs when recomputed from cell records".into());
        }
    } else if dir.join(RUN_FILE).is_file() {
        let r: RunRecord = read_json(&dir.join(RUN_FILE))?;
        verify_run(&r, data_dir, &mut report)?;
    } else {
        return Err(CliError::Usage(format!(
            "{} has neither {REPORT_FILE} nor {RUN_FILE}",
            dir.display()
        )));
    }
    Ok(report)
}
