//! Hyperparameter sweeps and per-method model selection.
//!
//! Selection rules:
//! - `pbgnet`, `pbgnet_pre`: smallest bound.
//! - `mlp`, `pbgnet_l`: smallest validation linear loss.
//! - `pbgnet_l_bnd`: smallest bound within each weight decay, then the
//!   smallest validation linear loss among those.
//!
//! Certificates use `delta / 9` whatever the grid, covering the nine
//! (layers, width) combinations of the full sweep.

use std::path::Path;

use serde::{Deserialize, Serialize};

use pbgnet::pacbayes::DEFAULT_MULTIPLICITY;
use pbgnet::train::Method;

use crate::config::{
    ExperimentConfig, RunRecord, DEFAULT_DELTA, GRID_LAYERS, GRID_LEARNING_RATES,
    GRID_SAMPLE_SIZES, GRID_WEIGHT_DECAYS, GRID_WIDTHS,
};
use crate::error::{CliError, CliResult};
use crate::run::{load_task, run_dir, run_on_task, write_json};

pub const REPORT_FILE: &str = "selection.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub task: String,
    pub methods: Vec<Method>,
    pub layers: Vec<usize>,
    pub widths: Vec<usize>,
    /// `None` entries run exactly.
    pub sample_sizes: Vec<Option<usize>>,
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub delta: f64,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
}

impl GridSpec {
    /// The full sweep for `task`.
    pub fn full(task: &str) -> Self {
        Self {
            task: task.to_string(),
            methods: Method::ALL.to_vec(),
            layers: GRID_LAYERS.to_vec(),
            widths: GRID_WIDTHS.to_vec(),
            sample_sizes: GRID_SAMPLE_SIZES.iter().map(|&t| Some(t)).collect(),
            learning_rates: GRID_LEARNING_RATES.to_vec(),
            weight_decays: GRID_WEIGHT_DECAYS.to_vec(),
            delta: DEFAULT_DELTA,
            seed: 0,
            epochs: None,
            batch_size: None,
        }
    }

    /// Cartesian product, skipping sample sizes for `mlp` and nonzero
    /// weight decays for the bound-minimizing methods.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &method in &self.methods {
            let sizes: Vec<Option<usize>> = if method == Method::Mlp {
                vec![None]
            } else {
                self.sample_sizes.clone()
            };
            let decays: Vec<f64> = if method.minimizes_bound() {
                vec![0.0]
            } else {
                self.weight_decays.clone()
            };
            for &layers in &self.layers {
                for &width in &self.widths {
                    for &sample_size in &sizes {
                        for &lr in &self.learning_rates {
                            for &weight_decay in &decays {
                                out.push(ExperimentConfig {
                                    task: self.task.clone(),
                                    method,
                                    layers,
                                    width,
                                    sample_size,
                                    lr,
                                    weight_decay,
                                    delta: self.delta,
                                    multiplicity: DEFAULT_MULTIPLICITY,
                                    seed: self.seed,
                                    epochs: self.epochs,
                                    batch_size: self.batch_size,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub index: usize,
    pub config: ExperimentConfig,
    pub record: Option<RunRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub method: Method,
    pub cell: usize,
    pub rule: String,
    pub record: RunRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub task: String,
    pub multiplicity: usize,
    pub delta: f64,
    pub selections: Vec<Selection>,
    pub cells: Vec<CellOutcome>,
    pub failed: Vec<usize>,
}

fn argmin<'a>(
    cells: impl Iterator<Item = &'a CellOutcome>,
    key: impl Fn(&RunRecord) -> Option<f64>,
) -> Option<&'a CellOutcome> {
    let mut best: Option<(&CellOutcome, f64)> = None;
    for c in cells {
        let Some(v) = c.record.as_ref().and_then(&key) else {
            continue;
        };
        if !v.is_nan() && best.is_none_or(|(_, b)| v < b) {
            best = Some((c, v));
        }
    }
    best.map(|(c, _)| c)
}

fn valid_loss(r: &RunRecord) -> Option<f64> {
    r.valid.map(|m| m.linear_loss)
}

pub fn selection_rule(method: Method) -> &'static str {
    match method {
        Method::Pbgnet | Method::PbgnetPre => "min bound",
        Method::Mlp | Method::PbgnetL => "min validation linear loss",
        Method::PbgnetLBnd => "min bound per weight decay, then min validation linear loss",
    }
}

/// Picks one cell per method among successful runs. Ties keep the
/// earliest cell.
pub fn select(cells: &[CellOutcome]) -> Vec<Selection> {
    let mut methods: Vec<Method> = Vec::new();
    for c in cells {
        if !methods.contains(&c.config.method) {
            methods.push(c.config.method);
        }
    }
    let mut out = Vec::new();
    for method in methods {
        let of_method = || cells.iter().filter(move |c| c.config.method == method);
        let chosen = match method {
            Method::Pbgnet | Method::PbgnetPre => argmin(of_method(), RunRecord::bound_value),
            Method::Mlp | Method::PbgnetL => argmin(of_method(), valid_loss),
            Method::PbgnetLBnd => {
                let mut decays: Vec<f64> = of_method().map(|c| c.config.weight_decay).collect();
                decays.sort_by(f64::total_cmp);
                decays.dedup();
                let per_decay: Vec<&CellOutcome> = decays
                    .iter()
                    .filter_map(|&wd| {
                        argmin(
                            of_method().filter(|c| c.config.weight_decay == wd),
                            RunRecord::bound_value,
                        )
                    })
                    .collect();
                argmin(per_decay.into_iter(), valid_loss)
            }
        };
        if let Some(c) = chosen {
            out.push(Selection {
                method,
                cell: c.index,
                rule: selection_rule(method).to_string(),
                record: c
                    .record
                    .clone()
                    .expect("argmin only returns successful cells"),
            });
        }
    }
    out
}

/// Runs every cell into `out_dir/cell-NNN` and writes `selection.json`.
/// Failed cells are listed, not fatal.
pub fn cmd_grid(spec: &GridSpec, data_dir: &Path, out_dir: &Path) -> CliResult<SelectionReport> {
    let cells = spec.cells();
    if cells.is_empty() {
        return Err(CliError::Usage("grid has no cells".into()));
    }
    for c in &cells {
        c.validate()?;
    }
    let (task_spec, task) = load_task(&spec.task, data_dir, spec.seed)?;
    std::fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("grid.json"), spec)?;
    let outcomes: Vec<CellOutcome> = cells
        .into_iter()
        .enumerate()
        .map(|(index, config)| {
            match run_on_task(&config, &task_spec, &task, &run_dir(out_dir, index)) {
                Ok(record) => CellOutcome {
                    index,
                    config,
                    record: Some(record),
                    error: None,
                },
                Err(e) => CellOutcome {
                    index,
                    config,
                    record: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let report = SelectionReport {
        task: spec.task.clone(),
        multiplicity: DEFAULT_MULTIPLICITY,
        delta: spec.delta,
        selections: select(&outcomes),
        failed: outcomes
            .iter()
            .filter(|c| c.record.is_none())
            .map(|c| c.index)
            .collect(),
        cells: outcomes,
    };
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pbgnet::pacbayes::{assemble_bound_report, BoundInputs, Provenance};
    use pbgnet::train::Metrics;

    fn outcome(
        index: usize,
        method: Method,
        wd: f64,
        bound_q: Option<f64>,
        valid: f64,
    ) -> CellOutcome {
        let mut config = ExperimentConfig::new("blobs", method);
        config.weight_decay = wd;
        let m = Metrics {
            linear_loss: 0.1,
            zero_one: 0.0,
            n: 10,
        };
        let bound = bound_q.map(|q| {
            assemble_bound_report(
                BoundInputs {
                    q,
                    kl: 1.0,
                    n: 100,
                    delta: 0.05,
                    multiplicity: 9,
                },
                Provenance::default(),
            )
            .unwrap()
        });
        let record = RunRecord {
            config: config.clone(),
            train: m,
            test: m,
            valid: Some(Metrics {
                linear_loss: valid,
                ..m
            }),
            bound,
            best_epoch: 1,
            epochs_run: 1,
            c: None,
            final_lr: 0.1,
            history_path: String::new(),
            checkpoint_path: String::new(),
        };
        CellOutcome {
            index,
            config,
            record: Some(record),
            error: None,
        }
    }

    #[test]
    fn bound_rule_picks_smaller_bound() {
        let cells = vec![
            outcome(0, Method::Pbgnet, 0.0, Some(0.3), 0.0),
            outcome(1, Method::Pbgnet, 0.0, Some(0.1), 0.5),
        ];
        let s = select(&cells);
        assert_eq!(s[0].cell, 1);
        assert!(
            cells[1].record.as_ref().unwrap().bound_value()
                < cells[0].record.as_ref().unwrap().bound_value()
        );
    }

    #[test]
    fn mlp_rule_ignores_bound() {
        let cells = vec![
            outcome(0, Method::Mlp, 0.0, Some(0.01), 0.4),
            outcome(1, Method::Mlp, 0.0, Some(0.3), 0.2),
        ];
        assert_eq!(select(&cells)[0].cell, 1);
    }

    #[test]
    fn hybrid_rule() {
        let cells = vec![
            outcome(0, Method::PbgnetLBnd, 0.0, Some(0.1), 0.40),
            outcome(1, Method::PbgnetLBnd, 0.0, Some(0.2), 0.10),
            outcome(2, Method::PbgnetLBnd, 1e-4, Some(0.3), 0.30),
            outcome(3, Method::PbgnetLBnd, 1e-4, Some(0.4), 0.05),
        ];
        // per decay: cells 0 and 2; then validation picks 2
        assert_eq!(select(&cells)[0].cell, 2);
    }

    #[test]
    fn failed_cells_are_skipped() {
        let mut bad = outcome(0, Method::Pbgnet, 0.0, Some(0.01), 0.0);
        bad.record = None;
        bad.error = Some("boom".into());
        let cells = vec![bad, outcome(1, Method::Pbgnet, 0.0, Some(0.3), 0.0)];
        assert_eq!(select(&cells)[0].cell, 1);
    }

    #[test]
    fn full_grid_size() {
        let g = GridSpec::full("blobs");
        let cells = g.cells();
        // 9 architectures x (pbgnet, pre: 5 T x 3 lr; l, l_bnd: 5 x 3 x 3; mlp: 3 x 3)
        assert_eq!(cells.len(), 9 * (2 * 15 + 2 * 45 + 9));
        assert!(cells.iter().all(|c| c.multiplicity == 9));
    }
}
