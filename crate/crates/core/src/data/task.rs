//! Binary tasks, deterministic splits and feature standardization.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Unlabeled-by-task pool: feature rows plus raw class labels as strings
/// (digits for MNIST, the label column's values for CSV).
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub features: Vec<f64>,
    pub dim: usize,
    pub classes: Vec<String>,
    pub sources: Vec<String>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// How raw classes map to `{-1, +1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskRule {
    /// Keep digits `a` and `b`; `a -> +1`, `b -> -1`.
    DigitPair { a: u8, b: u8 },
    /// Digits 0-4 -> +1, 5-9 -> -1.
    LowVsHigh,
    /// Rows whose label column equals `positive` -> +1, all others -> -1.
    CsvLabelColumn { column: String, positive: String },
}

impl TaskRule {
    fn label(&self, class: &str) -> Result<Option<f64>> {
        let digit = || {
            class
                .parse::<u8>()
                .map_err(|_| Error::Data(format!("class {class:?} is not a digit")))
        };
        Ok(match self {
            TaskRule::DigitPair { a, b } => {
                let d = digit()?;
                if d == *a {
                    Some(1.0)
                } else if d == *b {
                    Some(-1.0)
                } else {
                    None
                }
            }
            TaskRule::LowVsHigh => Some(if digit()? <= 4 { 1.0 } else { -1.0 }),
            TaskRule::CsvLabelColumn { positive, .. } => {
                Some(if class == positive { 1.0 } else { -1.0 })
            }
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            TaskRule::DigitPair { a, b } if a == b => Err(Error::InvalidArgument(format!(
                "digit pair needs two distinct digits, got {a} and {b}"
            ))),
            TaskRule::DigitPair { a, b } if *a > 9 || *b > 9 => Err(Error::InvalidArgument(
                format!("digits must be 0-9, got {a} and {b}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskProvenance {
    pub name: String,
    pub sources: Vec<String>,
    pub rule: Option<TaskRule>,
    pub seed: u64,
    pub standardized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskData {
    pub dim: usize,
    /// Row-major `n x dim`.
    pub features: Vec<f64>,
    /// `+1` or `-1`.
    pub labels: Vec<f64>,
    pub splits: Splits,
    pub provenance: TaskProvenance,
}

impl TaskData {
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
        provenance: TaskProvenance,
    ) -> Result<Self> {
        let task = Self {
            dim,
            features,
            labels,
            splits: Splits::default(),
            provenance,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.features.len() != self.labels.len() * self.dim {
            return Err(Error::Data(format!(
                "{} feature values for {} rows of dimension {}",
                self.features.len(),
                self.labels.len(),
                self.dim
            )));
        }
        if let Some(i) = self.labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Data(format!(
                "label {} at row {i} is not +-1",
                self.labels[i]
            )));
        }
        if let Some(i) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite feature in row {}",
                i / self.dim
            )));
        }
        let mut seen = vec![false; self.len()];
        for &i in self
            .splits
            .train
            .iter()
            .chain(&self.splits.valid)
            .chain(&self.splits.test)
        {
            if i >= self.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Data(format!(
                    "index {i} out of range or in two splits"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn view<'a>(&'a self, indices: &'a [usize]) -> DataView<'a> {
        DataView {
            task: self,
            indices,
        }
    }

    pub fn train(&self) -> DataView<'_> {
        self.view(&self.splits.train)
    }

    pub fn valid(&self) -> DataView<'_> {
        self.view(&self.splits.valid)
    }

    pub fn test(&self) -> DataView<'_> {
        self.view(&self.splits.test)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }
}

/// Read-only selection of rows.
#[derive(Clone, Copy, Debug)]
pub struct DataView<'a> {
    task: &'a TaskData,
    indices: &'a [usize],
}

impl<'a> DataView<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.task.dim
    }

    pub fn indices(&self) -> &'a [usize] {
        self.indices
    }

    /// `(x, y)` of the `i`-th row of the view.
    pub fn get(&self, i: usize) -> (&'a [f64], f64) {
        let r = self.indices[i];
        (self.task.row(r), self.task.labels[r])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a [f64], f64)> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// Filters and relabels `raw` according to `rule`.
pub fn build_task(raw: &RawDataset, rule: &TaskRule, name: &str) -> Result<TaskData> {
    rule.validate()?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..raw.len() {
        if let Some(y) = rule.label(&raw.classes[i])? {
            features.extend_from_slice(raw.row(i));
            labels.push(y);
        }
    }
    let pos = labels.iter().filter(|&&y| y > 0.0).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Data(format!(
            "task {name}: rule {rule:?} leaves {pos} positive and {} negative rows",
            labels.len() - pos
        )));
    }
    TaskData::new(
        raw.dim,
        features,
        labels,
        TaskProvenance {
            name: name.to_string(),
            sources: raw.sources.clone(),
            rule: Some(rule.clone()),
            seed: 0,
            standardized: false,
        },
    )
}

/// Seeded permutation of `0..n` cut into consecutive parts. Part `i` gets
/// `floor(sum_{j<=i} r_j * n) - floor(sum_{j<i} r_j * n)` rows; the last part
/// takes the remainder.
pub fn split_indices(n: usize, ratios: &[f64], seed: u64, label: &str) -> Result<Vec<Vec<usize>>> {
    let total: f64 = ratios.iter().sum();
    if ratios.is_empty() || ratios.iter().any(|&r| r <= 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut RngStream::derived(seed, label, &[n as u64]));
    let mut parts = Vec::with_capacity(ratios.len());
    let mut start = 0;
    let mut cum = 0.0;
    for (i, &r) in ratios.iter().enumerate() {
        cum += r;
        let end = if i + 1 == ratios.len() {
            n
        } else {
            ((cum * n as f64) + 1e-9).floor() as usize
        };
        if end <= start {
            return Err(Error::Data(format!(
                "split part {i} of {n} rows with ratios {ratios:?} is empty"
            )));
        }
        parts.push(perm[start..end].to_vec());
        start = end;
    }
    Ok(parts)
}

/// Train/test split of all rows (clears any previous splits).
pub fn split(mut task: TaskData, train_ratio: f64, seed: u64) -> Result<TaskData> {
    let mut parts = split_indices(task.len(), &[train_ratio, 1.0 - train_ratio], seed, "split")?;
    task.splits = Splits {
        test: parts.pop().unwrap(),
        train: parts.pop().unwrap(),
        valid: Vec::new(),
    };
    task.provenance.seed = seed;
    Ok(task)
}

/// Moves `valid_ratio` of the training rows to the validation split.
pub fn split_validation(mut task: TaskData, valid_ratio: f64, seed: u64) -> Result<TaskData> {
    let train = std::mem::take(&mut task.splits.train);
    let parts = split_indices(
        train.len(),
        &[1.0 - valid_ratio, valid_ratio],
        seed,
        "validation",
    )?;
    task.splits.train = parts[0].iter().map(|&i| train[i]).collect();
    task.splits.valid = parts[1].iter().map(|&i| train[i]).collect();
    Ok(task)
}

/// Per-feature mean and standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on the given rows; constant features keep unit scale.
    pub fn fit(view: &DataView<'_>) -> Result<Self> {
        if view.is_empty() {
            return Err(Error::Data("cannot standardize on an empty split".into()));
        }
        let d = view.dim();
        let n = view.len() as f64;
        let mut mean = vec![0.0; d];
        for (x, _) in view.iter() {
            for (m, &v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for (x, _) in view.iter() {
            for ((s, &v), &m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, task: &mut TaskData) {
        let d = task.dim;
        for (i, v) in task.features.iter_mut().enumerate() {
            let j = i % d;
            *v = (*v - self.mean[j]) / self.std[j];
        }
        task.provenance.standardized = true;
    }
}

/// Standardizes every row with statistics from the training split only.
pub fn standardize_on_train(mut task: TaskData) -> Result<TaskData> {
    let s = Standardizer::fit(&task.train())?;
    s.apply(&mut task);
    Ok(task)
}
