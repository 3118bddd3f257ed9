//! Dataset ingestion, binary task construction and splits.

pub mod idx;
pub mod mnist;
pub mod synthetic;
pub mod tabular;
pub mod task;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use idx::{parse_idx, IdxTensor};
pub use mnist::load_mnist;
pub use synthetic::Synthetic;
pub use tabular::{load_csv, CsvOptions};
pub use task::{
    build_task, split, split_indices, split_validation, standardize_on_train, DataView, RawDataset,
    Splits, Standardizer, TaskData, TaskProvenance, TaskRule,
};

use crate::error::{Error, Result};

pub const TRAIN_RATIO: f64 = 0.75;
pub const VALID_RATIO: f64 = 0.2;

/// Where a task's rows come from and how they are labeled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TaskSpec {
    Mnist {
        name: String,
        rule: TaskRule,
    },
    Csv {
        name: String,
        files: Vec<String>,
        options: CsvOptions,
        rule: TaskRule,
    },
    Synthetic {
        generator: Synthetic,
    },
}

impl TaskSpec {
    /// Built-in tasks: `mnist17`, `mnist49`, `mnist56`, `mnistLH`, `adult`,
    /// `ads`, `blobs`, `moons`.
    pub fn from_name(name: &str) -> Result<Self> {
        let pair = |a, b| TaskSpec::Mnist {
            name: name.to_string(),
            rule: TaskRule::DigitPair { a, b },
        };
        Ok(match name {
            "mnist17" => pair(1, 7),
            "mnist49" => pair(4, 9),
            "mnist56" => pair(5, 6),
            "mnistLH" | "mnistlh" => TaskSpec::Mnist {
                name: "mnistLH".into(),
                rule: TaskRule::LowVsHigh,
            },
            "adult" => TaskSpec::Csv {
                name: "adult".into(),
                files: vec!["adult.data".into(), "adult.test".into()],
                options: CsvOptions::adult(),
                rule: TaskRule::CsvLabelColumn {
                    column: "14".into(),
                    positive: ">50K".into(),
                },
            },
            "ads" => TaskSpec::Csv {
                name: "ads".into(),
                files: vec!["ad.data".into()],
                options: CsvOptions::ads(),
                rule: TaskRule::CsvLabelColumn {
                    column: "1558".into(),
                    positive: "ad.".into(),
                },
            },
            "blobs" => TaskSpec::Synthetic {
                generator: Synthetic::blobs(1000),
            },
            "moons" => TaskSpec::Synthetic {
                generator: Synthetic::moons(1000),
            },
            other => return Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        })
    }

    pub fn name(&self) -> &str {
        match self {
            TaskSpec::Mnist { name, .. } | TaskSpec::Csv { name, .. } => name,
            TaskSpec::Synthetic { generator } => generator.name(),
        }
    }

    /// Loads the task with a seeded 75/25 train/test split. MNIST files are
    /// looked up in `data_dir/mnist` then `data_dir`; CSV features are
    /// standardized with training-split statistics.
    pub fn load(&self, data_dir: &Path, seed: u64) -> Result<TaskData> {
        match self {
            TaskSpec::Mnist { name, rule } => {
                let sub = data_dir.join("mnist");
                let dir = if sub.is_dir() {
                    sub
                } else {
                    data_dir.to_path_buf()
                };
                let raw = load_mnist(&dir)?;
                split(build_task(&raw, rule, name)?, TRAIN_RATIO, seed)
            }
            TaskSpec::Csv {
                name,
                files,
                options,
                rule,
            } => {
                let paths: Vec<PathBuf> = files.iter().map(|f| resolve(data_dir, f)).collect();
                let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
                let raw = load_csv(&refs, options)?;
                standardize_on_train(split(build_task(&raw, rule, name)?, TRAIN_RATIO, seed)?)
            }
            TaskSpec::Synthetic { generator } => {
                split(generator.generate(seed, "task")?, TRAIN_RATIO, seed)
            }
        }
    }
}

fn resolve(data_dir: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        data_dir.join(p)
    }
}
