//! Plateau learning-rate decay and early stopping.

use serde::{Deserialize, Serialize};

/// Tracks consecutive non-improving epochs. The learning rate halves each
/// time that count reaches a multiple of `lr_patience`; training stops once
/// it exceeds `stop_patience`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub best: f64,
    pub bad_epochs: usize,
    pub lr_patience: usize,
    pub stop_patience: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

impl PlateauSchedule {
    pub fn new(lr: f64, lr_patience: usize, stop_patience: usize) -> Self {
        Self {
            lr,
            best: f64::INFINITY,
            bad_epochs: 0,
            lr_patience,
            stop_patience,
        }
    }

    /// Records one epoch's metric (lower is better).
    pub fn observe(&mut self, metric: f64) -> Observation {
        if metric < self.best {
            self.best = metric;
            self.bad_epochs = 0;
            return Observation {
                improved: true,
                stop: false,
            };
        }
        self.bad_epochs += 1;
        if self.lr_patience > 0 && self.bad_epochs.is_multiple_of(self.lr_patience) {
            self.lr *= 0.5;
        }
        Observation {
            improved: false,
            stop: self.bad_epochs > self.stop_patience,
        }
    }
}
