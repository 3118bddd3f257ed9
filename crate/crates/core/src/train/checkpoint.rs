//! Versioned JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::TaskSpec;
use crate::error::{Error, Result};
use crate::network::NetworkArchitecture;
use crate::train::trainer::{Model, TrainConfig, TrainOutcome};
use crate::Params;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Layer widths, input first.
    pub architecture: NetworkArchitecture,
    pub config: TrainConfig,
    pub task: Option<TaskSpec>,
    pub model: Model,
    pub prior: Option<Params>,
    pub gamma: Option<f64>,
    pub best_epoch: usize,
    /// Positions in the training split the certificate is computed on.
    pub bound_indices: Vec<usize>,
}

impl Checkpoint {
    pub fn from_outcome(
        config: &TrainConfig,
        task: Option<TaskSpec>,
        outcome: &TrainOutcome,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            architecture: outcome.model.architecture().clone(),
            config: config.clone(),
            task,
            model: outcome.model.clone(),
            prior: outcome.prior.clone(),
            gamma: outcome.gamma,
            best_epoch: outcome.best_epoch,
            bound_indices: outcome.bound_indices.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s)?;
        ck.check()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {} (this build reads {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if *self.model.architecture() != self.architecture {
            return Err(Error::Format(
                "model does not match the architecture header".into(),
            ));
        }
        if let Some(p) = &self.prior {
            if *p.architecture() != self.architecture {
                return Err(Error::Format(
                    "prior does not match the architecture header".into(),
                ));
            }
        }
        Ok(())
    }

    /// Errors unless rows of dimension `dim` fit the network.
    pub fn check_input_dim(&self, dim: usize) -> Result<()> {
        if self.architecture.input_dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: self.architecture.input_dim(),
                actual: dim,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Synthetic;
    use crate::train::trainer::{train, Method};

    #[test]
    fn round_trip_is_exact() {
        let t = Synthetic::blobs(60).generate(0, "train").unwrap();
        let data: Vec<_> = (0..t.len()).map(|i| (t.row(i), t.labels[i])).collect();
        let config = TrainConfig {
            width: 2,
            max_epochs: 3,
            ..TrainConfig::new(Method::Pbgnet)
        };
        let out = train(&config, &data).unwrap();
        let ck = Checkpoint::from_outcome(
            &config,
            Some(TaskSpec::Synthetic {
                generator: Synthetic::blobs(60),
            }),
            &out,
        );
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert!(back.check_input_dim(3).is_err());

        let mut bad = ck.clone();
        bad.version = 99;
        assert!(Checkpoint::from_json(&bad.to_json().unwrap()).is_err());
    }
}
