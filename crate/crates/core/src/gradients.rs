//! Hand-derived gradients of the aggregate predictor.
//!
//! Backpropagation runs over layer aggregates: `delta_k[l]` is the derivative
//! of the scalar objective with respect to `G_{k,l}(x)`. For a transition
//! `k -> k+1` with per-sign-vector values `E_j(s) = erf(w_{k+1,j} . s / sqrt(2 d_k))`
//!
//! ```text
//! dG_{k+1,j}/dw_{k+1,j} = sum_s s / sqrt(2 d_k) * erf'(...) * Psi_k(s)
//! dG_{k+1,j}/dG_{k,l}   = sum_s E_j(s) * s_l / 2 * prod_{i != l} psi_{s_i}
//! ```
//!
//! The second sum is never formed by dividing `Psi` by `psi_{s_l}`. All `d_k`
//! reduced products are obtained at once by a divide-and-conquer contraction
//! that costs `O(2^{d_k})` per layer instead of `O(d_k 2^{d_k})`.
//!
//! The sampled backward pass is pathwise for the weights of each sampled
//! layer and a score-function (REINFORCE) estimator through the sign draws.

use crate::aggregate::{
    product_table, psi_plus, psi_table, AggregateForward, Evaluator, ForwardMode, ForwardTrace,
};
use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::special::erf_prime;

/// Per-layer gradients, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients<F> {
    pub grads: NetworkParams<F>,
    /// Score-function denominators raised to the clamp floor.
    pub clamped_psi: usize,
}

impl<F: Real> LayerGradients<F> {
    pub fn zeros_like(params: &NetworkParams<F>) -> Self {
        Self {
            grads: NetworkParams::zeros(params.architecture()),
            clamped_psi: 0,
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: F, other: &Self) -> Result<()> {
        self.grads.same_shape(&other.grads)?;
        for k in 0..self.grads.depth() {
            self.grads.layer_mut(k).axpy(c, other.grads.layer(k))?;
        }
        self.clamped_psi += other.clamped_psi;
        Ok(())
    }

    pub fn scale(&mut self, c: F) {
        self.grads = self.grads.map(|v| v * c);
    }

    pub fn is_finite(&self) -> bool {
        self.grads.is_finite()
    }

    pub fn flatten(&self) -> Vec<F> {
        self.grads.flatten()
    }
}

/// `dG(x)/dW_k` for all layers from an exact forward pass.
pub fn grad_exact<F: Real>(
    params: &NetworkParams<F>,
    x: &[F],
    fwd: &AggregateForward<F>,
) -> Result<LayerGradients<F>> {
    let _ = x;
    let eval = Evaluator::new(params, ForwardMode::exact())?;
    backward(&eval, fwd, F::one())
}

/// Monte Carlo estimate of `dG(x)/dW_k` reusing the draws of a sampled forward pass.
pub fn grad_sampled<F: Real>(
    params: &NetworkParams<F>,
    x: &[F],
    fwd: &AggregateForward<F>,
) -> Result<LayerGradients<F>> {
    let _ = x;
    let ForwardTrace::Sampled { sample_size, .. } = fwd.trace else {
        return Err(Error::ModeMismatch {
            expected: "sampled",
            found: "exact",
        });
    };
    let eval = Evaluator::new(params, ForwardMode::Sampled { sample_size })?;
    backward(&eval, fwd, F::one())
}

/// Gradient of `upstream * G(x)` given a forward pass made with `eval`'s weights.
pub fn backward<F: Real>(
    eval: &Evaluator<'_, F>,
    fwd: &AggregateForward<F>,
    upstream: F,
) -> Result<LayerGradients<F>> {
    let mut out = LayerGradients::zeros_like(eval.params());
    backward_into(eval, fwd, upstream, &mut out)?;
    Ok(out)
}

/// Accumulates the gradient of `upstream * G(x)` into `out`.
pub fn backward_into<F: Real>(
    eval: &Evaluator<'_, F>,
    fwd: &AggregateForward<F>,
    upstream: F,
    out: &mut LayerGradients<F>,
) -> Result<()> {
    let params = eval.params();
    let depth = params.depth();
    if fwd.layers.len() != depth {
        return Err(Error::DimensionMismatch {
            expected: depth,
            actual: fwd.layers.len(),
        });
    }
    let hidden = match (&fwd.trace, eval.mode()) {
        (ForwardTrace::Exact, ForwardMode::Exact { .. }) => None,
        (ForwardTrace::Sampled { hidden, .. }, ForwardMode::Sampled { .. }) => Some(hidden),
        (trace, mode) => {
            let found = if matches!(trace, ForwardTrace::Exact) {
                "exact"
            } else {
                "sampled"
            };
            return Err(Error::ModeMismatch {
                expected: mode.name(),
                found,
            });
        }
    };
    let mut delta = vec![upstream];
    for k in (1..depth).rev() {
        delta = match hidden {
            None => exact_transition(eval, fwd, k, &delta, out),
            Some(h) => sampled_transition(eval, &h[k - 1], k, &delta, out),
        };
    }
    first_layer(fwd, &delta, out.grads.layer_mut(0));
    Ok(())
}

/// `dG_{1,j}/dw_{1,j} = x / (sqrt(2) |x|) * erf'(arg_j)`.
fn first_layer<F: Real>(
    fwd: &AggregateForward<F>,
    delta: &[F],
    grad: &mut crate::linalg::Matrix<F>,
) {
    if fwd.input_norm == F::zero() {
        return;
    }
    let unit = &fwd.input_unit;
    let scale = F::SQRT_2().recip();
    for (j, (&a, &dj)) in fwd.input_args.iter().zip(delta).enumerate() {
        let c = dj * scale * erf_prime(a);
        for (g, &u) in grad.row_mut(j).iter_mut().zip(unit) {
            *g = *g + c * u;
        }
    }
}

fn exact_transition<F: Real>(
    eval: &Evaluator<'_, F>,
    fwd: &AggregateForward<F>,
    k: usize,
    delta: &[F],
    out: &mut LayerGradients<F>,
) -> Vec<F> {
    let table = eval.tables[k - 1]
        .as_ref()
        .expect("exact mode builds every table");
    let g_prev = &fwd.layers[k - 1];
    let d = g_prev.len();
    let psi = psi_table(g_prev);
    let scale = (F::lit(2.0) * F::from_count(d)).sqrt().recip();

    // weights of layer k+1
    let grad = out.grads.layer_mut(k);
    let mut weighted = vec![F::zero(); psi.len()];
    for (j, &dj) in delta.iter().enumerate() {
        if dj == F::zero() {
            continue;
        }
        for ((b, &e), &p) in weighted.iter_mut().zip(&table.slope[j]).zip(&psi) {
            *b = e * p;
        }
        let signed = signed_sums(&weighted);
        let c = dj * scale;
        for (g, &v) in grad.row_mut(j).iter_mut().zip(&signed) {
            *g = *g + c * v;
        }
    }

    // previous layer aggregates
    let mut combined = vec![F::zero(); psi.len()];
    for (j, &dj) in delta.iter().enumerate() {
        if dj == F::zero() {
            continue;
        }
        for (a, &e) in combined.iter_mut().zip(&table.value[j]) {
            *a = *a + dj * e;
        }
    }
    let plus: Vec<F> = g_prev.iter().map(|&g| psi_plus(g)).collect();
    let minus: Vec<F> = plus.iter().map(|&p| F::one() - p).collect();
    let marginals = all_but_one(&combined, &plus, &minus);
    let half = F::lit(0.5);
    marginals.into_iter().map(|(m, p)| half * (p - m)).collect()
}

/// `sum_m s_i(m) * v[m]` for every bit `i`.
fn signed_sums<F: Real>(v: &[F]) -> Vec<F> {
    let d = v.len().trailing_zeros() as usize;
    let mut out = vec![F::zero(); d];
    for (m, &x) in v.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            if m >> i & 1 == 1 {
                *o = *o + x;
            } else {
                *o = *o - x;
            }
        }
    }
    out
}

/// For every mode `l` of the `d`-bit table `t`, the pair
/// `(sum_{s: s_l = -1} t(s) prod_{i != l} psi_{s_i}, sum_{s: s_l = +1} ...)`.
pub(crate) fn all_but_one<F: Real>(t: &[F], plus: &[F], minus: &[F]) -> Vec<(F, F)> {
    let d = plus.len();
    assert_eq!(t.len(), 1 << d);
    let mut out = vec![(F::zero(), F::zero()); d];
    if d > 0 {
        contract(t, plus, minus, 0, &mut out);
    }
    out
}

/// `t` is indexed by the bits of modes `offset..offset + plus.len()`.
fn contract<F: Real>(t: &[F], plus: &[F], minus: &[F], offset: usize, out: &mut [(F, F)]) {
    let n = plus.len();
    if n == 1 {
        out[offset] = (t[0], t[1]);
        return;
    }
    let n_lo = n / 2;
    let lo_len = 1usize << n_lo;
    let hi_len = 1usize << (n - n_lo);

    // contract the high modes with their psi products, recurse into the low ones
    let hi_w = product_table(&plus[n_lo..], &minus[n_lo..]);
    let mut low = vec![F::zero(); lo_len];
    for (h, &w) in hi_w.iter().enumerate() {
        for (acc, &v) in low.iter_mut().zip(&t[h * lo_len..(h + 1) * lo_len]) {
            *acc = *acc + v * w;
        }
    }
    contract(&low, &plus[..n_lo], &minus[..n_lo], offset, out);

    let lo_w = product_table(&plus[..n_lo], &minus[..n_lo]);
    let high: Vec<F> = (0..hi_len)
        .map(|h| {
            t[h * lo_len..(h + 1) * lo_len]
                .iter()
                .zip(&lo_w)
                .fold(F::zero(), |acc, (&v, &w)| acc + v * w)
        })
        .collect();
    contract(&high, &plus[n_lo..], &minus[n_lo..], offset + n_lo, out);
}

fn sampled_transition<F: Real>(
    eval: &Evaluator<'_, F>,
    draws: &crate::aggregate::SampledHidden<F>,
    k: usize,
    delta: &[F],
    out: &mut LayerGradients<F>,
) -> Vec<F> {
    let d = draws.width;
    let t_count = draws.sample_size;
    let inv_t = F::from_count(t_count).recip();
    let scale = (F::lit(2.0) * F::from_count(d)).sqrt().recip();
    let half = F::lit(0.5);
    let mut prev_delta = vec![F::zero(); d];
    let mut clamped = 0usize;
    let mut s = vec![0i8; d];
    {
        let grad = out.grads.layer_mut(k);
        for &(t, count) in draws.groups() {
            let t = t as usize;
            let mult = F::from_count(count as usize);
            draws.fill_sample(t, &mut s);
            // score weight c_t = sum_j delta_j E_j(s^t)
            let mut c = F::zero();
            for (j, &dj) in delta.iter().enumerate() {
                if dj == F::zero() {
                    continue;
                }
                c = c + dj * eval.sample_value(k, j, draws, t);
                let w = mult * dj * inv_t * scale * eval.sample_slope(k, j, draws, t);
                for (g, &si) in grad.row_mut(j).iter_mut().zip(&s) {
                    *g = if si > 0 { *g + w } else { *g - w };
                }
            }
            if c == F::zero() {
                continue;
            }
            let c = c * mult;
            for (l, &sl) in s.iter().enumerate() {
                let (p, hit) = draws.clamped_psi_of(l, sl);
                clamped += count as usize * usize::from(hit);
                let v = c * half / p;
                prev_delta[l] = if sl > 0 {
                    prev_delta[l] + v
                } else {
                    prev_delta[l] - v
                };
            }
        }
    }
    out.clamped_psi += clamped;
    prev_delta.iter().map(|&v| v * inv_t).collect()
}

/// Linear loss `1/2 (1 - y G)`.
#[inline]
pub fn linear_loss<F: Real>(g: F, y: F) -> F {
    F::lit(0.5) * (F::one() - y * g)
}

/// Batch-mean linear loss of the aggregate output and its gradient.
///
/// Example `i` of the batch draws its sign vectors from
/// `rng.child("example", [i])`, so results do not depend on evaluation order.
pub fn loss_gradient<F: Real, X: AsRef<[F]>>(
    params: &NetworkParams<F>,
    batch: &[(X, F)],
    mode: ForwardMode,
    rng: &RngStream,
) -> Result<(F, LayerGradients<F>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let eval = Evaluator::new(params, mode)?;
    let n = F::from_count(batch.len());
    let mut grads = LayerGradients::zeros_like(params);
    let mut loss = F::zero();
    for (i, (x, y)) in batch.iter().enumerate() {
        let mut ex_rng = rng.child("example", &[i as u64]);
        let fwd = eval.forward(x.as_ref(), &mut ex_rng)?;
        loss = loss + linear_loss(fwd.output(), *y);
        backward_into(&eval, &fwd, -F::lit(0.5) * *y / n, &mut grads)?;
    }
    Ok((loss / n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{aggregate_forward_exact, aggregate_forward_sampled};
    use crate::network::NetworkArchitecture;

    fn net(widths: Vec<usize>, seed: u64) -> NetworkParams<f64> {
        NetworkParams::gaussian(
            &NetworkArchitecture::new(widths).unwrap(),
            1.0,
            &mut RngStream::new(seed, 0),
        )
    }

    fn fd_grad(params: &NetworkParams<f64>, x: &[f64], h: f64) -> Vec<f64> {
        let flat = params.flatten();
        (0..flat.len())
            .map(|i| {
                let mut a = flat.clone();
                let mut b = flat.clone();
                a[i] += h;
                b[i] -= h;
                let pa = NetworkParams::from_flat(params.architecture(), &a).unwrap();
                let pb = NetworkParams::from_flat(params.architecture(), &b).unwrap();
                let ga = aggregate_forward_exact(&pa, x).unwrap().output();
                let gb = aggregate_forward_exact(&pb, x).unwrap().output();
                (ga - gb) / (2.0 * h)
            })
            .collect()
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn all_but_one_matches_brute_force() {
        let mut rng = RngStream::new(3, 0);
        for d in 1..=7 {
            let t: Vec<f64> = rng.gaussian_vec(1 << d);
            let plus: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            let minus: Vec<f64> = plus.iter().map(|p| 1.0 - p).collect();
            let got = all_but_one(&t, &plus, &minus);
            for l in 0..d {
                let (mut m, mut p) = (0.0, 0.0);
                for (mask, &v) in t.iter().enumerate() {
                    let w: f64 = (0..d)
                        .filter(|&i| i != l)
                        .map(|i| {
                            if mask >> i & 1 == 1 {
                                plus[i]
                            } else {
                                minus[i]
                            }
                        })
                        .product();
                    if mask >> l & 1 == 1 {
                        p += v * w;
                    } else {
                        m += v * w;
                    }
                }
                assert!((got[l].0 - m).abs() < 1e-12 && (got[l].1 - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_but_one_survives_zero_psi() {
        // psi_{-1} = 0 on mode 0: a division-based formula would produce NaN
        let t = [1.0f64, 2.0, 3.0, 4.0];
        let got = all_but_one(&t, &[1.0, 0.5], &[0.0, 0.5]);
        assert!(got.iter().all(|(a, b)| a.is_finite() && b.is_finite()));
        assert!((got[0].0 - 2.0).abs() < 1e-15 && (got[0].1 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        for (seed, widths) in [
            (0, vec![2, 3, 1]),
            (1, vec![2, 2, 2, 1]),
            (2, vec![3, 4, 3, 2, 1]),
            (3, vec![4, 1]),
        ] {
            let p = net(widths, seed);
            let x = RngStream::new(seed, 7).gaussian_vec(p.architecture().input_dim());
            let fwd = aggregate_forward_exact(&p, &x).unwrap();
            let g = grad_exact(&p, &x, &fwd).unwrap().flatten();
            let fd = fd_grad(&p, &x, 1e-4);
            assert!(max_rel_err(&g, &fd) < 1e-5, "seed {seed}: {g:?} vs {fd:?}");
        }
    }

    #[test]
    fn zero_output_weights_zero_first_layer_gradient() {
        let mut p = net(vec![2, 3, 1], 4);
        *p.layer_mut(1) = crate::linalg::Matrix::zeros(1, 3);
        let x = [0.7, -0.2];
        let fwd = aggregate_forward_exact(&p, &x).unwrap();
        let g = grad_exact(&p, &x, &fwd).unwrap();
        assert!(g.grads.layer(0).as_slice().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let p = net(vec![2, 3, 1], 5);
        let x = [1.0, 1.0];
        let exact = aggregate_forward_exact(&p, &x).unwrap();
        assert!(matches!(
            grad_sampled(&p, &x, &exact),
            Err(Error::ModeMismatch { .. })
        ));
        let sampled = aggregate_forward_sampled(&p, &x, 4, &mut RngStream::new(0, 0)).unwrap();
        assert!(matches!(
            grad_exact(&p, &x, &sampled),
            Err(Error::ModeMismatch { .. })
        ));
    }

    #[test]
    fn sampled_last_layer_matches_frozen_sample_differences() {
        let p = net(vec![3, 4, 1], 6);
        let x = [0.3, -0.8, 1.1];
        let fwd = aggregate_forward_sampled(&p, &x, 64, &mut RngStream::new(9, 0)).unwrap();
        let g = grad_sampled(&p, &x, &fwd).unwrap();
        let ForwardTrace::Sampled { hidden, .. } = &fwd.trace else {
            panic!()
        };
        let frozen = |w2: &[f64]| -> f64 {
            (0..64)
                .map(|t| {
                    let s = hidden[0].sample(t);
                    let a: f64 = w2.iter().zip(&s).map(|(w, &si)| w * si as f64).sum();
                    crate::special::erf(a / 8f64.sqrt())
                })
                .sum::<f64>()
                / 64.0
        };
        let w2 = p.output_weights().to_vec();
        let h = 1e-5;
        for i in 0..4 {
            let mut a = w2.clone();
            let mut b = w2.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (frozen(&a) - frozen(&b)) / (2.0 * h);
            let got = g.grads.layer(1).get(0, i);
            assert!(
                (got - fd).abs() <= 1e-5 * fd.abs().max(1e-3),
                "{got} vs {fd}"
            );
        }
    }

    #[test]
    fn sampled_zero_output_weights_zero_hidden_gradient() {
        let mut p = net(vec![2, 3, 1], 7);
        *p.layer_mut(1) = crate::linalg::Matrix::zeros(1, 3);
        let x = [0.1, 0.9];
        let fwd = aggregate_forward_sampled(&p, &x, 10, &mut RngStream::new(1, 1)).unwrap();
        let g = grad_sampled(&p, &x, &fwd).unwrap();
        assert!(g.grads.layer(0).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_loss_values() {
        assert_eq!(linear_loss(1.0, 1.0), 0.0);
        assert_eq!(linear_loss(0.0, -1.0), 0.5);
        assert_eq!(linear_loss(0.0, 1.0), 0.5);
    }

    #[test]
    fn loss_gradient_rejects_empty_batch() {
        let p = net(vec![2, 3, 1], 8);
        let batch: Vec<(Vec<f64>, f64)> = vec![];
        assert!(matches!(
            loss_gradient(&p, &batch, ForwardMode::exact(), &RngStream::new(0, 0)),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn loss_gradient_is_mean_of_chain_rule() {
        let p = net(vec![2, 3, 1], 9);
        let batch = vec![(vec![0.5, 1.0], 1.0), (vec![-1.0, 0.2], -1.0)];
        let (loss, g) =
            loss_gradient(&p, &batch, ForwardMode::exact(), &RngStream::new(0, 0)).unwrap();
        let mut want = LayerGradients::zeros_like(&p);
        let mut want_loss = 0.0;
        for (x, y) in &batch {
            let fwd = aggregate_forward_exact(&p, x).unwrap();
            want_loss += linear_loss(fwd.output(), *y) / 2.0;
            want.add_scaled(-0.25 * y, &grad_exact(&p, x, &fwd).unwrap())
                .unwrap();
        }
        assert!((loss - want_loss).abs() < 1e-15);
        assert!(max_rel_err(&g.flatten(), &want.flatten()) < 1e-14);
    }

    #[test]
    fn sampled_gradients_are_deterministic() {
        let p = net(vec![3, 5, 3, 1], 10);
        let batch = vec![(vec![0.5, 1.0, -0.3], 1.0), (vec![-1.0, 0.2, 0.4], -1.0)];
        let mode = ForwardMode::Sampled { sample_size: 20 };
        let a = loss_gradient(&p, &batch, mode, &RngStream::new(4, 2)).unwrap();
        let b = loss_gradient(&p, &batch, mode, &RngStream::new(4, 2)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
