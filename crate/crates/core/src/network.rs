//! Architecture and parameter types for binary activated multilayer networks,
//! plus the deterministic sign-activation forward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::RngStream;
use crate::scalar::Real;

/// Hidden widths above this make the exact combinatorial sums impractical
/// (2^20 terms per layer per example).
pub const DEFAULT_EXACT_CAP: usize = 20;

/// Layer widths `[d0, d1, ..., dL]` with `dL = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct NetworkArchitecture {
    widths: Vec<usize>,
}

impl NetworkArchitecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least an input and an output width, got {widths:?}"
            )));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidArchitecture(format!(
                "zero width in {widths:?}"
            )));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidArchitecture(format!(
                "output width must be 1 for binary classification, got {widths:?}"
            )));
        }
        Ok(Self { widths })
    }

    /// `hidden_layers` hidden layers of `width` neurons on a `d0`-dimensional input.
    pub fn uniform(d0: usize, hidden_layers: usize, width: usize) -> Result<Self> {
        let mut widths = vec![d0];
        widths.extend(std::iter::repeat_n(width, hidden_layers));
        widths.push(1);
        Self::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// `d_k` for `k` in `0..=L`.
    pub fn width(&self, k: usize) -> usize {
        self.widths[k]
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    /// Total parameter count `D = sum_k d_{k-1} d_k`.
    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }

    /// `d†_k = prod_{i=k}^{L} d_i`, with `d†_{L+1} = 1`.
    pub fn dagger(&self, k: usize) -> usize {
        if k > self.depth() {
            return 1;
        }
        self.widths[k..]
            .iter()
            .fold(1usize, |acc, &w| acc.saturating_mul(w))
    }

    /// Replication multiplicity of each layer's weight rows under the
    /// BAM-to-tree map: `[d†_2, ..., d†_L, 1]`.
    pub fn tree_replication_counts(&self) -> Vec<usize> {
        (1..=self.depth()).map(|k| self.dagger(k + 1)).collect()
    }

    /// Number of edges of the decoupled computation tree, `sum_k d†_k d_{k-1}`.
    pub fn tree_edge_count(&self) -> usize {
        (1..=self.depth())
            .map(|k| self.dagger(k).saturating_mul(self.widths[k - 1]))
            .fold(0usize, |a, b| a.saturating_add(b))
    }

    pub fn exact_feasible(&self, cap: usize) -> bool {
        self.check_exact(cap).is_ok()
    }

    pub fn check_exact(&self, cap: usize) -> Result<()> {
        for (i, &w) in self.hidden_widths().iter().enumerate() {
            if w > cap {
                return Err(Error::ExactCapacity {
                    layer: i + 1,
                    width: w,
                    cap,
                });
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for NetworkArchitecture {
    type Error = Error;
    fn try_from(widths: Vec<usize>) -> Result<Self> {
        Self::new(widths)
    }
}

impl From<NetworkArchitecture> for Vec<usize> {
    fn from(a: NetworkArchitecture) -> Self {
        a.widths
    }
}

/// Weight matrices `W_1..W_L`. Also used for the prior mean.
///
/// Layers are indexed from 0 in code: `layer(0)` is `W_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams<F> {
    arch: NetworkArchitecture,
    layers: Vec<Matrix<F>>,
}

impl<F: Real> NetworkParams<F> {
    pub fn zeros(arch: &NetworkArchitecture) -> Self {
        let layers = arch
            .widths
            .windows(2)
            .map(|w| Matrix::zeros(w[1], w[0]))
            .collect();
        Self {
            arch: arch.clone(),
            layers,
        }
    }

    pub fn from_layers(arch: &NetworkArchitecture, layers: Vec<Matrix<F>>) -> Result<Self> {
        if layers.len() != arch.depth() {
            return Err(Error::DimensionMismatch {
                expected: arch.depth(),
                actual: layers.len(),
            });
        }
        for (k, m) in layers.iter().enumerate() {
            let want = (arch.widths[k + 1], arch.widths[k]);
            if m.shape() != want {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {} has shape {:?}, expected {:?}",
                    k + 1,
                    m.shape(),
                    want
                )));
            }
            if !m.is_finite() {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        Ok(Self {
            arch: arch.clone(),
            layers,
        })
    }

    /// Gaussian weights with standard deviation `1/sqrt(fan_in)` per layer.
    pub fn init_fan_in(arch: &NetworkArchitecture, rng: &mut RngStream) -> Self {
        let layers = arch
            .widths
            .windows(2)
            .map(|w| {
                let std = 1.0 / (w[0] as f64).sqrt();
                Matrix::from_fn(w[1], w[0], |_, _| F::lit(std * rng.standard_normal()))
            })
            .collect();
        Self {
            arch: arch.clone(),
            layers,
        }
    }

    /// Every weight drawn i.i.d. `N(0, scale^2)`.
    pub fn gaussian(arch: &NetworkArchitecture, scale: f64, rng: &mut RngStream) -> Self {
        let layers = arch
            .widths
            .windows(2)
            .map(|w| Matrix::from_fn(w[1], w[0], |_, _| F::lit(scale * rng.standard_normal())))
            .collect();
        Self {
            arch: arch.clone(),
            layers,
        }
    }

    pub fn architecture(&self) -> &NetworkArchitecture {
        &self.arch
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, k: usize) -> &Matrix<F> {
        &self.layers[k]
    }

    pub fn layer_mut(&mut self, k: usize) -> &mut Matrix<F> {
        &mut self.layers[k]
    }

    pub fn layers(&self) -> &[Matrix<F>] {
        &self.layers
    }

    /// Output neuron weights `w_L`.
    pub fn output_weights(&self) -> &[F] {
        self.layers.last().unwrap().row(0)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|m| m.as_slice().len()).sum()
    }

    pub fn flatten(&self) -> Vec<F> {
        self.layers
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }

    pub fn from_flat(arch: &NetworkArchitecture, flat: &[F]) -> Result<Self> {
        if flat.len() != arch.num_params() {
            return Err(Error::DimensionMismatch {
                expected: arch.num_params(),
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        let mut layers = Vec::with_capacity(arch.depth());
        for w in arch.widths.windows(2) {
            let len = w[0] * w[1];
            layers.push(Matrix::new(
                w[1],
                w[0],
                flat[offset..offset + len].to_vec(),
            )?);
            offset += len;
        }
        Ok(Self {
            arch: arch.clone(),
            layers,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Matrix::is_finite)
    }

    pub fn sq_norm(&self) -> F {
        self.layers.iter().map(Matrix::frobenius_sq).sum()
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::InvalidArchitecture(format!(
                "shape mismatch: {:?} vs {:?}",
                self.arch.widths, other.arch.widths
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            arch: self.arch.clone(),
            layers: self.layers.iter().map(|m| m.map(&f)).collect(),
        }
    }

    /// Converts to another scalar type.
    pub fn cast<G: Real>(&self) -> NetworkParams<G> {
        let layers = self
            .layers
            .iter()
            .map(|m| {
                Matrix::from_fn(m.rows(), m.cols(), |i, j| {
                    G::lit(m.get(i, j).to_f64_lossy())
                })
            })
            .collect();
        NetworkParams {
            arch: self.arch.clone(),
            layers,
        }
    }
}

/// `sgn(a) = +1` if `a > 0`, else `-1` (so `sgn(0) = -1`).
#[inline]
pub fn sgn<F: Real>(a: F) -> F {
    if a > F::zero() {
        F::one()
    } else {
        -F::one()
    }
}

/// Output label of the deterministic BAM network.
pub fn bam_forward<F: Real>(params: &NetworkParams<F>, x: &[F]) -> Result<i8> {
    let d0 = params.arch.input_dim();
    if x.len() != d0 {
        return Err(Error::DimensionMismatch {
            expected: d0,
            actual: x.len(),
        });
    }
    let mut h: Vec<F> = x.to_vec();
    for m in &params.layers {
        h = (0..m.rows()).map(|i| sgn(dot(m.row(i), &h))).collect();
    }
    Ok(if h[0] > F::zero() { 1 } else { -1 })
}

/// A point of `{-1, +1}^d`.
///
/// Enumeration order is binary counting over a mask where bit `i` set means
/// `s_{i+1} = +1`; mask 0 is the all-minus vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignVector {
    values: Vec<i8>,
}

impl SignVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::InvalidArgument(
                "sign vector entries must be +1 or -1".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn from_mask(mask: u64, d: usize) -> Self {
        debug_assert!(d <= 64);
        let values = (0..d)
            .map(|i| if mask >> i & 1 == 1 { 1 } else { -1 })
            .collect();
        Self { values }
    }

    pub fn mask(&self) -> u64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .fold(0u64, |m, (i, _)| m | 1 << i)
    }

    /// All `2^d` sign vectors in enumeration order.
    pub fn enumerate(d: usize) -> impl Iterator<Item = SignVector> {
        (0..1u64 << d).map(move |m| SignVector::from_mask(m, d))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn to_real<F: Real>(&self) -> Vec<F> {
        self.values
            .iter()
            .map(|&v| if v > 0 { F::one() } else { -F::one() })
            .collect()
    }
}
