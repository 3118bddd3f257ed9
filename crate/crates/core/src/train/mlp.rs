//! Fully connected tanh network trained on the linear loss.
//!
//! Hidden and output units use tanh; each layer has a bias. Weight decay
//! applies to weights and biases alike.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradients::linear_loss;
use crate::linalg::{dot, Matrix};
use crate::network::NetworkArchitecture;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub arch: NetworkArchitecture,
    pub weights: Vec<Matrix<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Weights `N(0, 1/fan_in)`, biases zero.
    pub fn init(arch: &NetworkArchitecture, rng: &mut RngStream) -> Self {
        let w = arch.widths();
        let weights = w
            .windows(2)
            .map(|p| {
                let std = 1.0 / (p[0] as f64).sqrt();
                Matrix::from_fn(p[1], p[0], |_, _| std * rng.standard_normal())
            })
            .collect();
        let biases = w[1..].iter().map(|&d| vec![0.0; d]).collect();
        Self {
            arch: arch.clone(),
            weights,
            biases,
        }
    }

    pub fn zeros(arch: &NetworkArchitecture) -> Self {
        let w = arch.widths();
        Self {
            arch: arch.clone(),
            weights: w.windows(2).map(|p| Matrix::zeros(p[1], p[0])).collect(),
            biases: w[1..].iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.flatten().len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                actual: flat.len(),
            });
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.as_slice().len();
            w.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
            let m = b.len();
            b.copy_from_slice(&flat[at..at + m]);
            at += m;
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let h = acts.last().unwrap();
            acts.push(
                (0..w.rows())
                    .map(|i| (dot(w.row(i), h) + b[i]).tanh())
                    .collect(),
            );
        }
        acts
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        self.activations(x).last().unwrap()[0]
    }

    /// Batch-mean linear loss plus `rho/2 |params|^2` and its flat gradient.
    pub fn loss_and_grad(
        &self,
        batch: &[(&[f64], f64)],
        weight_decay: f64,
    ) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = batch.len() as f64;
        let mut gw: Vec<Matrix<f64>> = self
            .weights
            .iter()
            .map(|w| Matrix::zeros(w.rows(), w.cols()))
            .collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut loss = 0.0;
        for (x, y) in batch {
            let acts = self.activations(x);
            let out = acts.last().unwrap()[0];
            loss += linear_loss(out, *y) / n;
            // d loss / d output
            let mut delta = vec![-0.5 * y / n];
            for k in (0..self.weights.len()).rev() {
                let a = &acts[k + 1];
                let pre: Vec<f64> = delta
                    .iter()
                    .zip(a)
                    .map(|(d, h)| d * (1.0 - h * h))
                    .collect();
                for (i, &p) in pre.iter().enumerate() {
                    gb[k][i] += p;
                    for (g, &h) in gw[k].row_mut(i).iter_mut().zip(&acts[k]) {
                        *g += p * h;
                    }
                }
                if k > 0 {
                    let w = &self.weights[k];
                    delta = (0..w.cols())
                        .map(|j| pre.iter().enumerate().map(|(i, &p)| p * w.get(i, j)).sum())
                        .collect();
                }
            }
        }
        let mut flat = Vec::with_capacity(self.num_params());
        for (w, b) in gw.iter().zip(&gb) {
            flat.extend_from_slice(w.as_slice());
            flat.extend_from_slice(b);
        }
        if weight_decay > 0.0 {
            let p = self.flatten();
            loss += 0.5 * weight_decay * p.iter().map(|v| v * v).sum::<f64>();
            for (g, v) in flat.iter_mut().zip(p) {
                *g += weight_decay * v;
            }
        }
        Ok((loss, flat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_half_loss() {
        let arch = NetworkArchitecture::new(vec![2, 3, 1]).unwrap();
        let m = MlpParams::zeros(&arch);
        let x = [0.3, -2.0];
        let (loss, _) = m.loss_and_grad(&[(&x, 1.0), (&x, -1.0)], 0.0).unwrap();
        assert_eq!(loss, 0.5);
    }

    #[test]
    fn gradient_matches_differences() {
        let arch = NetworkArchitecture::new(vec![2, 3, 1]).unwrap();
        let mut m = MlpParams::init(&arch, &mut RngStream::new(4, 0));
        m.biases[0] = vec![0.1, -0.2, 0.3];
        let xs = [[0.4, -1.0], [1.5, 0.2]];
        let batch: Vec<(&[f64], f64)> = vec![(&xs[0], 1.0), (&xs[1], -1.0)];
        let (_, g) = m.loss_and_grad(&batch, 1e-3).unwrap();
        let flat = m.flatten();
        let h = 1e-6;
        let mut probe = m.clone();
        for i in 0..flat.len() {
            let mut a = flat.clone();
            a[i] += h;
            probe.unflatten(&a).unwrap();
            let up = probe.loss_and_grad(&batch, 1e-3).unwrap().0;
            a[i] -= 2.0 * h;
            probe.unflatten(&a).unwrap();
            let down = probe.loss_and_grad(&batch, 1e-3).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            assert!(
                (g[i] - fd).abs() <= 1e-5 * fd.abs().max(1e-3),
                "coord {i}: {} vs {fd}",
                g[i]
            );
        }
    }
}
