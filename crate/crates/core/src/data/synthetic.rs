//! Small two-dimensional generators for sanity runs and surface plots.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::task::{TaskData, TaskProvenance};
use crate::error::Result;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Synthetic {
    /// Two isotropic Gaussian blobs at `+-center` with standard deviation
    /// `spread`; the `+center` blob is labeled +1.
    Blobs {
        n: usize,
        center: [f64; 2],
        spread: f64,
    },
    /// Interleaving half circles, shifted so the origin sits between them.
    Moons { n: usize, noise: f64 },
}

impl Synthetic {
    pub fn blobs(n: usize) -> Self {
        Synthetic::Blobs {
            n,
            center: [1.0, 1.0],
            spread: 0.5,
        }
    }

    pub fn moons(n: usize) -> Self {
        Synthetic::Moons { n, noise: 0.1 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Synthetic::Blobs { .. } => "blobs",
            Synthetic::Moons { .. } => "moons",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Synthetic::Blobs { n, .. } | Synthetic::Moons { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Draws `n` rows, alternating labels +1, -1, +1, ...
    pub fn generate(&self, seed: u64, stream_label: &str) -> Result<TaskData> {
        let mut rng = RngStream::derived(seed, stream_label, &[]);
        let n = self.len();
        let mut features = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let (a, b) = match *self {
                Synthetic::Blobs { center, spread, .. } => (
                    y * center[0] + spread * rng.standard_normal(),
                    y * center[1] + spread * rng.standard_normal(),
                ),
                Synthetic::Moons { noise, .. } => {
                    let t = PI * rng.uniform();
                    let (cx, cy) = if y > 0.0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    };
                    (
                        cx - 0.5 + noise * rng.standard_normal(),
                        cy - 0.25 + noise * rng.standard_normal(),
                    )
                }
            };
            features.extend_from_slice(&[a, b]);
            labels.push(y);
        }
        TaskData::new(
            2,
            features,
            labels,
            TaskProvenance {
                name: self.name().into(),
                sources: vec![],
                rule: None,
                seed,
                standardized: false,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let a = Synthetic::blobs(100).generate(1, "train").unwrap();
        let b = Synthetic::blobs(100).generate(1, "train").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels.iter().filter(|&&y| y > 0.0).count(), 50);
        let c = Synthetic::blobs(100).generate(1, "holdout").unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn blobs_mostly_separable_through_origin() {
        let t = Synthetic::blobs(2000).generate(3, "x").unwrap();
        let correct = (0..t.len())
            .filter(|&i| (t.row(i)[0] + t.row(i)[1]) * t.labels[i] > 0.0)
            .count();
        assert!(correct as f64 / 2000.0 > 0.97);
    }

    #[test]
    fn moons_shape() {
        let t = Synthetic::moons(400).generate(0, "x").unwrap();
        assert_eq!(t.dim, 2);
        assert!(t.features.iter().all(|v| v.abs() < 3.0));
    }
}
