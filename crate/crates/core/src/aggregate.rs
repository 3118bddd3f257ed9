//! Aggregate predictor: the expectation of a BAM network's output under an
//! isotropic Gaussian posterior centred on its weights, computed layer by
//! layer through the BAM-to-tree decoupling.
//!
//! Layer 1 is closed form, `G1_j(x) = erf(w1_j . x / (sqrt(2) |x|))`. Every
//! deeper layer mixes the `2^{d_k}` sign vectors `s` of the previous layer:
//!
//! ```text
//! G_{k+1,j}(x) = sum_s erf(w_{k+1,j} . s / sqrt(2 d_k)) * Psi_k(s)
//! Psi_k(s)     = prod_i (1/2 + 1/2 s_i G_{k,i}(x))
//! ```
//!
//! The exact mode enumerates the sum (bounded by an exact-width cap); the
//! sampled mode draws `T` sign vectors per layer from `Psi_k`.
//!
//! `Psi` factors are kept in linear space. They lie in `[0, 1]` and a layer
//! has at most `exact_cap` of them, so a product only underflows when one of
//! its factors is already negligible and the term contributes nothing.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, pairwise_sum};
use crate::network::{NetworkParams, SignVector};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::special::{erf, erf_prime};

/// Widths up to this get precomputed sign tables in sampled mode.
pub const SAMPLED_TABLE_CAP: usize = 12;

/// `Psi` denominators below this are clamped in the score-function estimator.
pub const PSI_CLAMP: f64 = 1e-6;

/// `erf(w . x / (sqrt(2) |x|))`, defined as 0 when `x = 0`.
pub fn linear_neuron_aggregate<F: Real>(w: &[F], x: &[F]) -> Result<F> {
    if w.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: x.len(),
        });
    }
    Ok(erf(input_argument(w, x, norm(x))))
}

#[inline]
pub(crate) fn input_argument<F: Real>(w: &[F], x: &[F], x_norm: F) -> F {
    if x_norm == F::zero() {
        return F::zero();
    }
    dot(w, x) / (F::SQRT_2() * x_norm)
}

/// `psi_{+1} = 1/2 + 1/2 g`.
#[inline]
pub fn psi_plus<F: Real>(g: F) -> F {
    F::lit(0.5) + F::lit(0.5) * g
}

/// Probability `Psi(s) = prod_i (1/2 + 1/2 s_i g_i)` of the sign vector `s`
/// given the previous layer's aggregate outputs `g`.
pub fn psi_layer<F: Real>(prev_g: &[F], s: &SignVector) -> F {
    assert_eq!(prev_g.len(), s.len(), "sign vector width");
    prev_g
        .iter()
        .zip(s.values())
        .fold(F::one(), |acc, (&g, &si)| {
            acc * if si > 0 {
                psi_plus(g)
            } else {
                F::one() - psi_plus(g)
            }
        })
}

/// `Psi` for every mask in enumeration order, built by doubling.
pub(crate) fn psi_table<F: Real>(g: &[F]) -> Vec<F> {
    let plus: Vec<F> = g.iter().map(|&v| psi_plus(v)).collect();
    let minus: Vec<F> = plus.iter().map(|&p| F::one() - p).collect();
    product_table(&plus, &minus)
}

/// `prod_i (bit i ? plus[i] : minus[i])` for every mask over `plus.len()` bits.
pub(crate) fn product_table<F: Real>(plus: &[F], minus: &[F]) -> Vec<F> {
    let d = plus.len();
    let mut table = Vec::with_capacity(1 << d);
    table.push(F::one());
    for i in 0..d {
        let half = table.len();
        for m in 0..half {
            let v = table[m];
            table[m] = v * minus[i];
            table.push(v * plus[i]);
        }
    }
    table
}

/// `w . s` for every mask, built by doubling from the all-minus vector.
pub(crate) fn preactivation_table<F: Real>(w: &[F]) -> Vec<F> {
    let d = w.len();
    let mut table = Vec::with_capacity(1 << d);
    table.push(-w.iter().copied().sum::<F>());
    for (i, &wi) in w.iter().enumerate() {
        let two_w = wi + wi;
        for m in 0..(1usize << i) {
            let v = table[m] + two_w;
            table.push(v);
        }
    }
    table
}

/// Per-mask `erf` and `erf'` of `w_{k+1,j} . s / sqrt(2 d_k)` for one layer
/// transition, shared by every example evaluated with the same weights.
#[derive(Clone, Debug)]
pub(crate) struct TransitionTable<F> {
    /// `[neuron][mask]`
    pub(crate) value: Vec<Vec<F>>,
    pub(crate) slope: Vec<Vec<F>>,
}

impl<F: Real> TransitionTable<F> {
    fn new(weights: &crate::linalg::Matrix<F>) -> Self {
        let scale = (F::lit(2.0) * F::from_count(weights.cols())).sqrt().recip();
        let mut value = Vec::with_capacity(weights.rows());
        let mut slope = Vec::with_capacity(weights.rows());
        for j in 0..weights.rows() {
            let pre = preactivation_table(weights.row(j));
            value.push(pre.iter().map(|&a| erf(a * scale)).collect());
            slope.push(pre.iter().map(|&a| erf_prime(a * scale)).collect());
        }
        Self { value, slope }
    }
}

/// How the combinatorial sums of hidden layers are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForwardMode {
    /// Full enumeration; every hidden width must be `<= cap`.
    Exact { cap: usize },
    /// Monte Carlo with `T` sign vectors per hidden layer.
    Sampled { sample_size: usize },
}

impl ForwardMode {
    pub fn exact() -> Self {
        ForwardMode::Exact {
            cap: crate::network::DEFAULT_EXACT_CAP,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ForwardMode::Exact { .. } => "exact",
            ForwardMode::Sampled { .. } => "sampled",
        }
    }
}

/// Sign vectors drawn for one hidden layer.
///
/// `s_i^t = sgn(psi_{+1}(i) - z_i^t)` with `z = u / 2^32` for a uniform
/// 32-bit integer `u`, drawn in order `t`-major then unit `i`. The `u` are
/// the high then low halves of successive outputs of a xoshiro256++
/// generator seeded with one draw from the caller's stream.
#[derive(Clone, Debug)]
pub struct SampledHidden<F> {
    pub width: usize,
    pub sample_size: usize,
    /// `psi_{+1}(i)` at draw time, before any clamping.
    pub psi_plus: Vec<F>,
    /// `max(psi_{+1}(i), PSI_CLAMP)` and `max(psi_{-1}(i), PSI_CLAMP)`.
    pub clamped_plus: Vec<F>,
    pub clamped_minus: Vec<F>,
    /// Bit `i` of draw `t` set iff `s_i^t = +1`; used when `width <= 64`.
    masks: Vec<u64>,
    /// Row-major `T x width` signs; used when `width > 64`.
    signs: Vec<i8>,
    /// `(representative draw, multiplicity)` of every distinct pattern when
    /// `width <= SAMPLED_TABLE_CAP`, else every draw once.
    groups: Vec<(u32, u32)>,
}

/// 32-bit words from a xoshiro256++ stream, high half first.
pub(crate) struct HalfWords {
    inner: Xoshiro256PlusPlus,
    low: Option<u32>,
}

impl HalfWords {
    pub(crate) fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            low: None,
        }
    }

    #[inline]
    pub(crate) fn next(&mut self) -> u32 {
        match self.low.take() {
            Some(v) => v,
            None => {
                let w = self.inner.next_u64();
                self.low = Some(w as u32);
                (w >> 32) as u32
            }
        }
    }
}

/// Draws `T` sign vectors with `Pr(s_i = +1) = 1/2 + 1/2 prev_g[i]`.
pub fn sample_hidden<F: Real>(
    prev_g: &[F],
    sample_size: usize,
    rng: &mut RngStream,
) -> SampledHidden<F> {
    SampledHidden::draw(prev_g, sample_size, rng)
}

impl<F: Real> SampledHidden<F> {
    fn draw(g: &[F], sample_size: usize, rng: &mut RngStream) -> Self {
        let width = g.len();
        let psi: Vec<F> = g.iter().map(|&v| psi_plus(v)).collect();
        let floor = F::lit(PSI_CLAMP);
        let clamped_plus = psi.iter().map(|&p| p.max(floor)).collect();
        let clamped_minus = psi.iter().map(|&p| (F::one() - p).max(floor)).collect();
        // u / 2^32 < p  <=>  u < ceil(p 2^32)
        let thresholds: Vec<u64> = psi
            .iter()
            .map(|p| (p.to_f64_lossy().clamp(0.0, 1.0) * 4_294_967_296.0).ceil() as u64)
            .collect();
        let mut masks = Vec::new();
        let mut signs = Vec::new();
        let mut bits = HalfWords::new(rng.next_u64());
        if width <= 64 {
            masks.reserve(sample_size);
            for _ in 0..sample_size {
                let mut mask = 0u64;
                for (i, &thr) in thresholds.iter().enumerate() {
                    mask |= u64::from((bits.next() as u64) < thr) << i;
                }
                masks.push(mask);
            }
        } else {
            signs.reserve(sample_size * width);
            for _ in 0..sample_size {
                for &thr in &thresholds {
                    signs.push(if (bits.next() as u64) < thr { 1 } else { -1 });
                }
            }
        }
        let groups = if width <= SAMPLED_TABLE_CAP {
            let mut first = vec![u32::MAX; 1 << width];
            let mut count = vec![0u32; 1 << width];
            for (t, &m) in masks.iter().enumerate() {
                if count[m as usize] == 0 {
                    first[m as usize] = t as u32;
                }
                count[m as usize] += 1;
            }
            first
                .into_iter()
                .zip(count)
                .filter(|&(_, c)| c > 0)
                .collect()
        } else {
            (0..sample_size as u32).map(|t| (t, 1)).collect()
        };
        Self {
            width,
            sample_size,
            psi_plus: psi,
            clamped_plus,
            clamped_minus,
            masks,
            signs,
            groups,
        }
    }

    /// Sign of unit `i` in draw `t`.
    #[inline]
    pub fn sign(&self, t: usize, i: usize) -> i8 {
        if self.width <= 64 {
            if self.masks[t] >> i & 1 == 1 {
                1
            } else {
                -1
            }
        } else {
            self.signs[t * self.width + i]
        }
    }

    /// Draw `t` as a sign vector.
    pub fn sample(&self, t: usize) -> Vec<i8> {
        (0..self.width).map(|i| self.sign(t, i)).collect()
    }

    pub(crate) fn fill_sample(&self, t: usize, out: &mut [i8]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.sign(t, i);
        }
    }

    /// Bit pattern of draw `t` when `width <= 64`.
    #[inline]
    pub fn mask(&self, t: usize) -> Option<u64> {
        self.masks.get(t).copied()
    }

    /// Distinct draws with multiplicities; they sum to `T`.
    pub fn groups(&self) -> &[(u32, u32)] {
        &self.groups
    }

    /// `psi_{s_i}` for sign `s`, unclamped.
    pub fn psi_of(&self, i: usize, s: i8) -> F {
        if s > 0 {
            self.psi_plus[i]
        } else {
            F::one() - self.psi_plus[i]
        }
    }

    /// `max(psi_{s_i}, PSI_CLAMP)` and whether the clamp was active.
    #[inline]
    pub fn clamped_psi_of(&self, i: usize, s: i8) -> (F, bool) {
        let (c, raw) = if s > 0 {
            (self.clamped_plus[i], self.psi_plus[i])
        } else {
            (self.clamped_minus[i], F::one() - self.psi_plus[i])
        };
        (c, c != raw)
    }
}

#[derive(Clone, Debug)]
pub enum ForwardTrace<F> {
    Exact,
    Sampled {
        sample_size: usize,
        /// One entry per hidden layer, `k = 1..L-1`.
        hidden: Vec<SampledHidden<F>>,
        /// Standard error of the output-layer Monte Carlo mean, conditional
        /// on the previous layers.
        output_std_error: F,
    },
}

/// Per-layer aggregate outputs for one example.
#[derive(Clone, Debug)]
pub struct AggregateForward<F> {
    /// `layers[k-1]` holds `G_k(x)` for `k = 1..L`; the last has one entry.
    pub layers: Vec<Vec<F>>,
    /// First-layer erf arguments `w1_j . x / (sqrt(2) |x|)`.
    pub input_args: Vec<F>,
    /// `x / |x|`, zero when `x = 0`.
    pub input_unit: Vec<F>,
    pub input_norm: F,
    pub trace: ForwardTrace<F>,
}

impl<F: Real> AggregateForward<F> {
    /// Final aggregate output `G(x)`.
    pub fn output(&self) -> F {
        self.layers.last().unwrap()[0]
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.trace, ForwardTrace::Exact)
    }

    pub fn mode_name(&self) -> &'static str {
        if self.is_exact() {
            "exact"
        } else {
            "sampled"
        }
    }

    /// Variance of the sampled output estimate (0 in exact mode).
    pub fn output_variance(&self) -> F {
        match &self.trace {
            ForwardTrace::Exact => F::zero(),
            ForwardTrace::Sampled {
                output_std_error, ..
            } => *output_std_error * *output_std_error,
        }
    }
}

/// Network plus the per-transition sign tables valid for its current weights.
/// Rebuild after every parameter update.
pub struct Evaluator<'a, F> {
    params: &'a NetworkParams<F>,
    mode: ForwardMode,
    pub(crate) tables: Vec<Option<TransitionTable<F>>>,
}

impl<'a, F: Real> Evaluator<'a, F> {
    pub fn new(params: &'a NetworkParams<F>, mode: ForwardMode) -> Result<Self> {
        let arch = params.architecture();
        let table_cap = match mode {
            ForwardMode::Exact { cap } => {
                arch.check_exact(cap)?;
                cap
            }
            ForwardMode::Sampled { sample_size } => {
                if sample_size == 0 {
                    return Err(Error::InvalidArgument("sample size T must be >= 1".into()));
                }
                SAMPLED_TABLE_CAP
            }
        };
        // transition k -> k+1 reads the width of layer k; layer 0 is the input
        let tables = (1..arch.depth())
            .map(|k| (arch.width(k) <= table_cap).then(|| TransitionTable::new(params.layer(k))))
            .collect();
        Ok(Self {
            params,
            mode,
            tables,
        })
    }

    pub fn params(&self) -> &NetworkParams<F> {
        self.params
    }

    pub fn mode(&self) -> ForwardMode {
        self.mode
    }

    /// Forward pass in this evaluator's mode. `rng` is only read in sampled mode.
    pub fn forward(&self, x: &[F], rng: &mut RngStream) -> Result<AggregateForward<F>> {
        match self.mode {
            ForwardMode::Exact { .. } => self.forward_exact(x),
            ForwardMode::Sampled { sample_size } => self.forward_sampled(x, sample_size, rng),
        }
    }

    fn first_layer(&self, x: &[F]) -> Result<(Vec<F>, Vec<F>, Vec<F>, F)> {
        let d0 = self.params.architecture().input_dim();
        if x.len() != d0 {
            return Err(Error::DimensionMismatch {
                expected: d0,
                actual: x.len(),
            });
        }
        let x_norm = norm(x);
        let w1 = self.params.layer(0);
        let args: Vec<F> = (0..w1.rows())
            .map(|j| input_argument(w1.row(j), x, x_norm))
            .collect();
        let g1 = args.iter().map(|&a| erf(a)).collect();
        let unit = if x_norm == F::zero() {
            vec![F::zero(); d0]
        } else {
            x.iter().map(|&v| v / x_norm).collect()
        };
        Ok((args, unit, g1, x_norm))
    }

    pub fn forward_exact(&self, x: &[F]) -> Result<AggregateForward<F>> {
        if !matches!(self.mode, ForwardMode::Exact { .. }) {
            return Err(Error::ModeMismatch {
                expected: "exact",
                found: "sampled",
            });
        }
        let (input_args, input_unit, g1, input_norm) = self.first_layer(x)?;
        let mut layers = vec![g1];
        let mut scratch = Vec::new();
        for k in 1..self.params.depth() {
            let table = self.tables[k - 1]
                .as_ref()
                .expect("exact mode builds every table");
            let psi = psi_table(&layers[k - 1]);
            let next = table
                .value
                .iter()
                .map(|e| {
                    scratch.clear();
                    scratch.extend(e.iter().zip(&psi).map(|(&a, &b)| a * b));
                    pairwise_sum(&scratch)
                })
                .collect();
            layers.push(next);
        }
        Ok(AggregateForward {
            layers,
            input_args,
            input_unit,
            input_norm,
            trace: ForwardTrace::Exact,
        })
    }

    pub fn forward_sampled(
        &self,
        x: &[F],
        sample_size: usize,
        rng: &mut RngStream,
    ) -> Result<AggregateForward<F>> {
        if sample_size == 0 {
            return Err(Error::InvalidArgument("sample size T must be >= 1".into()));
        }
        let (input_args, input_unit, g1, input_norm) = self.first_layer(x)?;
        let mut layers = vec![g1];
        let mut hidden = Vec::with_capacity(self.params.depth().saturating_sub(1));
        let mut output_std_error = F::zero();
        let t_real = F::from_count(sample_size);
        for k in 1..self.params.depth() {
            let draws = SampledHidden::draw(&layers[k - 1], sample_size, rng);
            let w = self.params.layer(k);
            let is_output = k + 1 == self.params.depth();
            let mut next = Vec::with_capacity(w.rows());
            for j in 0..w.rows() {
                let (mut sum, mut sum_sq) = (F::zero(), F::zero());
                for &(t, count) in draws.groups() {
                    let v = self.sample_value(k, j, &draws, t as usize);
                    let cv = F::from_count(count as usize) * v;
                    sum = sum + cv;
                    sum_sq = sum_sq + cv * v;
                }
                let mean = sum / t_real;
                if is_output {
                    output_std_error = if sample_size > 1 {
                        let var = (sum_sq - t_real * mean * mean) / F::from_count(sample_size - 1);
                        (var.max(F::zero()) / t_real).sqrt()
                    } else {
                        F::zero()
                    };
                }
                next.push(mean);
            }
            hidden.push(draws);
            layers.push(next);
        }
        Ok(AggregateForward {
            layers,
            input_args,
            input_unit,
            input_norm,
            trace: ForwardTrace::Sampled {
                sample_size,
                hidden,
                output_std_error,
            },
        })
    }

    /// `erf(w_{k+1,j} . s^t / sqrt(2 d_k))` for draw `t` of hidden layer `k`.
    #[inline]
    pub(crate) fn sample_value(&self, k: usize, j: usize, draws: &SampledHidden<F>, t: usize) -> F {
        match (&self.tables[k - 1], draws.mask(t)) {
            (Some(table), Some(m)) => table.value[j][m as usize],
            _ => erf(self.sample_argument(k, j, draws, t)),
        }
    }

    #[inline]
    pub(crate) fn sample_slope(&self, k: usize, j: usize, draws: &SampledHidden<F>, t: usize) -> F {
        match (&self.tables[k - 1], draws.mask(t)) {
            (Some(table), Some(m)) => table.slope[j][m as usize],
            _ => erf_prime(self.sample_argument(k, j, draws, t)),
        }
    }

    fn sample_argument(&self, k: usize, j: usize, draws: &SampledHidden<F>, t: usize) -> F {
        let w = self.params.layer(k).row(j);
        let a = w.iter().enumerate().fold(F::zero(), |acc, (i, &wi)| {
            if draws.sign(t, i) > 0 {
                acc + wi
            } else {
                acc - wi
            }
        });
        a / (F::lit(2.0) * F::from_count(w.len())).sqrt()
    }
}

/// Exact aggregate output `G(x)` and all hidden-layer aggregates.
pub fn aggregate_forward_exact<F: Real>(
    params: &NetworkParams<F>,
    x: &[F],
) -> Result<AggregateForward<F>> {
    Evaluator::new(params, ForwardMode::exact())?.forward_exact(x)
}

/// Monte Carlo aggregate with `T` sign-vector draws per hidden layer.
pub fn aggregate_forward_sampled<F: Real>(
    params: &NetworkParams<F>,
    x: &[F],
    sample_size: usize,
    rng: &mut RngStream,
) -> Result<AggregateForward<F>> {
    Evaluator::new(params, ForwardMode::Sampled { sample_size })?.forward_sampled(
        x,
        sample_size,
        rng,
    )
}

/// One term of the single-hidden-layer majority vote.
#[derive(Clone, Debug)]
pub struct VoteTerm<F> {
    pub signs: SignVector,
    /// `Psi(s | x)`.
    pub weight: F,
    /// `erf(w_2 . s / sqrt(2 d_1))`.
    pub vote: F,
}

/// Decomposes `F(x)` of a one-hidden-layer network into its `2^{d1}`
/// representation votes: `F(x) = sum_s weight_s * vote_s`.
pub fn vote_decomposition<F: Real>(params: &NetworkParams<F>, x: &[F]) -> Result<Vec<VoteTerm<F>>> {
    if params.depth() != 2 {
        return Err(Error::InvalidArgument(format!(
            "vote decomposition needs exactly one hidden layer, network has {}",
            params.depth() - 1
        )));
    }
    let fwd = aggregate_forward_exact(params, x)?;
    let d1 = params.architecture().width(1);
    let psi = psi_table(&fwd.layers[0]);
    let pre = preactivation_table(params.output_weights());
    let scale = (F::lit(2.0) * F::from_count(d1)).sqrt().recip();
    Ok((0..psi.len())
        .map(|m| VoteTerm {
            signs: SignVector::from_mask(m as u64, d1),
            weight: psi[m],
            vote: erf(pre[m] * scale),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::network::NetworkArchitecture;

    fn random_net(widths: Vec<usize>, seed: u64) -> NetworkParams<f64> {
        let arch = NetworkArchitecture::new(widths).unwrap();
        NetworkParams::gaussian(&arch, 1.0, &mut RngStream::new(seed, 0))
    }

    fn random_x(d: usize, seed: u64) -> Vec<f64> {
        RngStream::new(seed, 99).gaussian_vec(d)
    }

    /// Single-hidden-layer formula written out directly over sign vectors.
    fn direct_one_hidden(params: &NetworkParams<f64>, x: &[f64]) -> f64 {
        let w1 = params.layer(0);
        let w2 = params.output_weights();
        let d1 = w1.rows();
        let g1: Vec<f64> = (0..d1)
            .map(|j| linear_neuron_aggregate(w1.row(j), x).unwrap())
            .collect();
        SignVector::enumerate(d1)
            .map(|s| {
                let sv: Vec<f64> = s.to_real();
                erf(dot(w2, &sv) / (2.0 * d1 as f64).sqrt()) * psi_layer(&g1, &s)
            })
            .sum()
    }

    #[test]
    fn linear_neuron_zero_weights() {
        assert_eq!(
            linear_neuron_aggregate(&[0.0, 0.0], &[1.0, 2.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn linear_neuron_zero_input() {
        assert_eq!(
            linear_neuron_aggregate(&[1.0, 2.0], &[0.0, 0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn linear_neuron_sign_follows_margin() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..100 {
            let w: Vec<f64> = rng.gaussian_vec(4);
            let x: Vec<f64> = rng.gaussian_vec(4);
            let v = linear_neuron_aggregate(&w, &x).unwrap();
            assert_eq!(v > 0.0, dot(&w, &x) > 0.0);
        }
    }

    #[test]
    fn psi_uniform_when_previous_layer_is_zero() {
        let g = vec![0.0f64; 4];
        for s in SignVector::enumerate(4) {
            assert!((psi_layer(&g, &s) - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_single_unit() {
        let g = [0.5f64];
        assert!((psi_layer(&g, &SignVector::new(vec![1]).unwrap()) - 0.75).abs() < 1e-15);
        assert!((psi_layer(&g, &SignVector::new(vec![-1]).unwrap()) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn psi_table_matches_psi_layer_and_sums_to_one() {
        let mut rng = RngStream::new(11, 0);
        for d in [1usize, 3, 7, 12] {
            let g: Vec<f64> = (0..d).map(|_| 2.0 * rng.uniform() - 1.0).collect();
            let table = psi_table(&g);
            for (m, &p) in table.iter().enumerate() {
                assert!((p - psi_layer(&g, &SignVector::from_mask(m as u64, d))).abs() < 1e-15);
            }
            assert!((pairwise_sum(&table) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn preactivation_table_matches_dot() {
        let w = [0.3, -1.2, 0.7, 2.0];
        let table = preactivation_table(&w);
        for (m, &a) in table.iter().enumerate() {
            let s: Vec<f64> = SignVector::from_mask(m as u64, 4).to_real();
            assert!((a - dot(&w, &s)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_weights_give_zero() {
        let mut p = random_net(vec![3, 4, 1], 1);
        *p.layer_mut(1) = Matrix::zeros(1, 4);
        let fwd = aggregate_forward_exact(&p, &random_x(3, 1)).unwrap();
        assert_eq!(fwd.output(), 0.0);
    }

    #[test]
    fn negating_output_weights_negates_output() {
        let p = random_net(vec![3, 4, 3, 1], 2);
        let x = random_x(3, 2);
        let mut q = p.clone();
        *q.layer_mut(2) = p.layer(2).map(|v| -v);
        let a = aggregate_forward_exact(&p, &x).unwrap().output();
        let b = aggregate_forward_exact(&q, &x).unwrap().output();
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn one_hidden_layer_matches_direct_formula() {
        for seed in 0..10 {
            let p = random_net(vec![4, 5, 1], seed);
            let x = random_x(4, seed);
            let got = aggregate_forward_exact(&p, &x).unwrap().output();
            assert!((got - direct_one_hidden(&p, &x)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_forward_is_bit_reproducible() {
        let p = random_net(vec![3, 6, 4, 1], 3);
        let x = random_x(3, 3);
        let a = aggregate_forward_exact(&p, &x).unwrap();
        let b = aggregate_forward_exact(&p, &x).unwrap();
        assert_eq!(a.layers, b.layers);
    }

    #[test]
    fn capacity_error_names_layer() {
        let p = random_net(vec![2, 3, 21, 1], 4);
        match aggregate_forward_exact(&p, &[1.0, 0.0]) {
            Err(Error::ExactCapacity {
                layer: 2,
                width: 21,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sampled_zero_output_weights_give_zero() {
        let mut p = random_net(vec![3, 5, 1], 5);
        *p.layer_mut(1) = Matrix::zeros(1, 5);
        let fwd =
            aggregate_forward_sampled(&p, &random_x(3, 5), 17, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(fwd.output(), 0.0);
    }

    #[test]
    fn sampled_signs_follow_threshold_rule() {
        let p = random_net(vec![3, 5, 2, 1], 6);
        let fwd =
            aggregate_forward_sampled(&p, &random_x(3, 6), 50, &mut RngStream::new(1, 0)).unwrap();
        let ForwardTrace::Sampled { hidden, .. } = &fwd.trace else {
            panic!()
        };
        assert_eq!(hidden.len(), 2);
        let mut rng = RngStream::new(1, 0);
        for h in hidden {
            let mut replay = HalfWords::new(rng.next_u64());
            for t in 0..h.sample_size {
                for i in 0..h.width {
                    let z = replay.next() as f64 / 4_294_967_296.0;
                    let want = if h.psi_plus[i].to_f64_lossy() - z > 0.0 {
                        1
                    } else {
                        -1
                    };
                    assert_eq!(h.sample(t)[i], want);
                }
            }
        }
    }

    #[test]
    fn table_and_direct_sample_paths_agree() {
        // width 14 > SAMPLED_TABLE_CAP takes the direct path; compare against
        // an exact-mode evaluator whose tables cover it
        let p = random_net(vec![3, 14, 1], 7);
        let x = random_x(3, 7);
        let direct = Evaluator::new(&p, ForwardMode::Sampled { sample_size: 40 }).unwrap();
        assert!(direct.tables[0].is_none());
        let fwd = direct
            .forward_sampled(&x, 40, &mut RngStream::new(2, 0))
            .unwrap();
        let tabled = Evaluator::new(&p, ForwardMode::exact()).unwrap();
        let ForwardTrace::Sampled { hidden, .. } = &fwd.trace else {
            panic!()
        };
        for t in 0..40 {
            let a = direct.sample_value(1, 0, &hidden[0], t);
            let b = tabled.sample_value(1, 0, &hidden[0], t);
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn vote_terms_sum_to_output() {
        let p = random_net(vec![2, 3, 1], 8);
        let x = [0.4, -1.3];
        let terms = vote_decomposition(&p, &x).unwrap();
        assert_eq!(terms.len(), 8);
        let total: f64 = terms.iter().map(|t| t.weight * t.vote).sum();
        let g = aggregate_forward_exact(&p, &x).unwrap().output();
        assert!((total - g).abs() < 1e-12);
        let wsum: f64 = terms.iter().map(|t| t.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f32_forward_tracks_f64() {
        let p = random_net(vec![4, 6, 3, 1], 9);
        let x = random_x(4, 9);
        let a = aggregate_forward_exact(&p, &x).unwrap().output();
        let p32: NetworkParams<f32> = p.cast();
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let b = aggregate_forward_exact(&p32, &x32).unwrap().output();
        assert!((a - b as f64).abs() < 1e-5);
    }
}
