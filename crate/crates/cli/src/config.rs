//! Experiment configuration and result records.

use serde::{Deserialize, Serialize};

use pbgnet::pacbayes::{BoundReport, DEFAULT_MULTIPLICITY};
use pbgnet::train::{Method, Metrics, TrainConfig};
use pbgnet::ForwardMode;

use crate::error::{CliError, CliResult};

pub const GRID_LAYERS: [usize; 3] = [1, 2, 3];
pub const GRID_WIDTHS: [usize; 3] = [10, 50, 100];
pub const GRID_SAMPLE_SIZES: [usize; 5] = [10, 50, 100, 1000, 10000];
pub const GRID_LEARNING_RATES: [f64; 3] = [0.1, 0.01, 0.001];
pub const GRID_WEIGHT_DECAYS: [f64; 3] = [0.0, 1e-6, 1e-4];
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: String,
    pub method: Method,
    pub layers: usize,
    pub width: usize,
    /// `None` evaluates hidden layers exactly.
    pub sample_size: Option<usize>,
    pub lr: f64,
    pub weight_decay: f64,
    pub delta: f64,
    pub multiplicity: usize,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(task: &str, method: Method) -> Self {
        Self {
            task: task.to_string(),
            method,
            layers: 1,
            width: 10,
            sample_size: None,
            lr: 0.01,
            weight_decay: 0.0,
            delta: DEFAULT_DELTA,
            multiplicity: DEFAULT_MULTIPLICITY,
            seed: 0,
            epochs: None,
            batch_size: None,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if !(1..=3).contains(&self.layers) {
            return usage(format!("--layers must be 1, 2 or 3, got {}", self.layers));
        }
        if self.method == Method::Mlp && self.sample_size.is_some() {
            return usage("mlp does not take --sample-size".into());
        }
        if self.method.minimizes_bound() && self.weight_decay != 0.0 {
            return usage(format!(
                "{} does not take --weight-decay",
                self.method.name()
            ));
        }
        self.train_config()
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn mode(&self) -> ForwardMode {
        match self.sample_size {
            Some(sample_size) => ForwardMode::Sampled { sample_size },
            None => ForwardMode::exact(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut c = TrainConfig::new(self.method);
        c.hidden_layers = self.layers;
        c.width = self.width;
        c.mode = self.mode();
        c.lr = self.lr;
        c.weight_decay = self.weight_decay;
        c.delta = self.delta;
        c.multiplicity = self.multiplicity;
        c.seed = self.seed;
        if let Some(e) = self.epochs {
            c.max_epochs = e;
        }
        c.batch_size = self.batch_size;
        c
    }
}

/// Outcome of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    /// Training-split metrics (`E_S`).
    pub train: Metrics,
    /// Test-split metrics (`E_T`).
    pub test: Metrics,
    pub valid: Option<Metrics>,
    pub bound: Option<BoundReport>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Trained Catoni parameter `exp(gamma)` for bound-minimizing methods.
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub final_lr: f64,
    pub history_path: String,
    pub checkpoint_path: String,
}

impl RunRecord {
    pub fn bound_value(&self) -> Option<f64> {
        self.bound.as_ref().map(|b| b.seeger_bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_constraints() {
        let mut c = ExperimentConfig::new("blobs", Method::Mlp);
        c.sample_size = Some(100);
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
        let mut c = ExperimentConfig::new("blobs", Method::Pbgnet);
        c.weight_decay = 1e-4;
        assert!(c.validate().is_err());
        c.weight_decay = 0.0;
        c.layers = 4;
        assert!(c.validate().is_err());
        c.layers = 2;
        assert!(c.validate().is_ok());
    }
}
