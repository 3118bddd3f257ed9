//! Bound machinery: binary kl and its inversion, the Catoni bound and its
//! optimal `C`, the tree-weighted KL between Gaussian posterior and prior,
//! and assembly of the final risk certificate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::scalar::Real;

pub const KL_INVERSE_TOL: f64 = 1e-9;
pub const KL_INVERSE_MAX_ITER: usize = 200;

/// Search interval for `ln C` in the Catoni infimum.
pub const LN_C_RANGE: (f64, f64) = (-10.0, 10.0);
pub const GOLDEN_TOL: f64 = 1e-10;

/// Architecture grid cells sharing the confidence budget (3 widths x 3 depths).
pub const DEFAULT_MULTIPLICITY: usize = 9;

/// `x ln(x / y)` with `0 ln 0 = 0`.
fn xlogx_over_y<F: Real>(x: F, y: F) -> F {
    if x == F::zero() {
        F::zero()
    } else if y == F::zero() {
        F::infinity()
    } else {
        x * (x / y).ln()
    }
}

/// `kl(q || p) = q ln(q/p) + (1-q) ln((1-q)/(1-p))`; `+inf` when `p` sits on an
/// endpoint that `q` does not.
pub fn kl_bernoulli<F: Real>(q: F, p: F) -> F {
    let v = xlogx_over_y(q, p) + xlogx_over_y(F::one() - q, F::one() - p);
    // rounding can leave tiny negatives near q = p
    v.max(F::zero())
}

/// Largest `p` in `[q, 1]` with `kl(q || p) <= xi`, by bisection.
///
/// Returns the upper end of the final bracket, so the result never
/// understates the bound by more than the tolerance.
pub fn kl_inverse<F: Real>(q: F, xi: F) -> F {
    if xi <= F::zero() {
        return q;
    }
    if q >= F::one() {
        return F::one();
    }
    let tol = F::lit(KL_INVERSE_TOL);
    let (mut lo, mut hi) = (q, F::one());
    for _ in 0..KL_INVERSE_MAX_ITER {
        if hi - lo <= tol {
            break;
        }
        let mid = F::lit(0.5) * (lo + hi);
        if kl_bernoulli(q, mid) <= xi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `(1 - exp(-C q - xi)) / (1 - exp(-C))`, unclipped.
pub fn catoni_bound<F: Real>(q: F, xi: F, c: F) -> F {
    -(-(c * q + xi)).exp_m1() / -(-c).exp_m1()
}

/// `Delta(C, q, p) = -ln(1 - p (1 - e^{-C})) - C q`.
pub fn catoni_delta<F: Real>(c: F, q: F, p: F) -> F {
    let one_minus_e = -(-c).exp_m1();
    -(-(p * one_minus_e)).ln_1p() - c * q
}

/// Maximizer of `Delta(., q, p)`: `ln(p (1-q) / (q (1-p)))`, `+inf` when `q = 0`.
pub fn optimal_catoni_c<F: Real>(q: F, p: F) -> Result<F> {
    if !(q >= F::zero() && q < p && p < F::one()) {
        return Err(Error::InvalidArgument(format!(
            "optimal C needs 0 <= q < p < 1, got q={q}, p={p}"
        )));
    }
    if q == F::zero() {
        return Ok(F::infinity());
    }
    Ok((p * (F::one() - q) / (q * (F::one() - p))).ln())
}

/// `inf_C catoni_bound(q, xi, C)` by golden-section search over `ln C`.
/// Returns `(bound, C)`.
pub fn catoni_infimum<F: Real>(q: F, xi: F) -> (F, F) {
    let f = |u: F| catoni_bound(q, xi, u.exp());
    let inv_phi = F::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (F::lit(LN_C_RANGE.0), F::lit(LN_C_RANGE.1));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let tol = F::lit(GOLDEN_TOL);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let u = F::lit(0.5) * (a + b);
    (f(u), u.exp())
}

/// `xi = (KL + ln(2 sqrt(n) / delta')) / n`.
pub fn complexity_term<F: Real>(kl: F, n: usize, delta_prime: F) -> F {
    let n_real = F::from_count(n);
    (kl + (F::lit(2.0) * n_real.sqrt() / delta_prime).ln()) / n_real
}

/// KL between the posterior and prior of the decoupled tree network:
/// `1/2 (|w_L - u_L|^2 + sum_{k<L} d†_{k+1} |W_k - U_k|_F^2)`.
pub fn kl_network_divergence<F: Real>(
    theta: &NetworkParams<F>,
    mu: &NetworkParams<F>,
) -> Result<F> {
    theta.same_shape(mu)?;
    let counts = theta.architecture().tree_replication_counts();
    let mut total = F::zero();
    for (k, &r) in counts.iter().enumerate() {
        let sq: F = theta
            .layer(k)
            .as_slice()
            .iter()
            .zip(mu.layer(k).as_slice())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        total = total + F::from_count(r) * sq;
    }
    Ok(F::lit(0.5) * total)
}

/// Gradient of [`kl_network_divergence`] in `theta`: `d†_{k+1} (W_k - U_k)`.
pub fn kl_network_gradient<F: Real>(
    theta: &NetworkParams<F>,
    mu: &NetworkParams<F>,
) -> Result<NetworkParams<F>> {
    theta.same_shape(mu)?;
    let counts = theta.architecture().tree_replication_counts();
    let mut out = NetworkParams::zeros(theta.architecture());
    for (k, &r) in counts.iter().enumerate() {
        let r = F::from_count(r);
        for ((g, &a), &b) in out
            .layer_mut(k)
            .as_mut_slice()
            .iter_mut()
            .zip(theta.layer(k).as_slice())
            .zip(mu.layer(k).as_slice())
        {
            *g = r * (a - b);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Empirical linear loss.
    pub q: f64,
    pub kl: f64,
    pub n: usize,
    pub delta: f64,
    pub multiplicity: usize,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("bound input {what}")));
        if !(0.0..=1.0).contains(&self.q) {
            return bad("q outside [0, 1]");
        }
        if !(self.kl >= 0.0 && self.kl.is_finite()) {
            return bad("KL negative or non-finite");
        }
        if self.n == 0 {
            return bad("n = 0");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta outside (0, 1)");
        }
        if self.multiplicity == 0 {
            return bad("multiplicity = 0");
        }
        Ok(())
    }

    pub fn delta_prime(&self) -> f64 {
        self.delta / self.multiplicity as f64
    }
}

/// Where a reported bound came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub epoch: Option<usize>,
    /// Sign-vector draws per layer; `None` for exact evaluation.
    pub sample_size: Option<usize>,
    pub repetitions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub q: f64,
    pub kl: f64,
    pub n: usize,
    pub delta: f64,
    pub multiplicity: usize,
    pub xi: f64,
    pub seeger_bound: f64,
    /// Catoni bound at its optimal `C`; unclipped.
    pub catoni_bound: f64,
    /// `None` when the optimum is at `C -> infinity` (`q = 0`).
    #[serde(rename = "catoni_C")]
    pub catoni_c: Option<f64>,
    pub zero_one_bound: f64,
    #[serde(default)]
    pub provenance: Provenance,
}

impl BoundReport {
    pub fn inputs(&self) -> BoundInputs {
        BoundInputs {
            q: self.q,
            kl: self.kl,
            n: self.n,
            delta: self.delta,
            multiplicity: self.multiplicity,
        }
    }

    pub fn catoni_bound_clipped(&self) -> f64 {
        self.catoni_bound.clamp(0.0, 1.0)
    }
}

pub fn assemble_bound_report(inputs: BoundInputs, provenance: Provenance) -> Result<BoundReport> {
    inputs.validate()?;
    let xi = complexity_term(inputs.kl, inputs.n, inputs.delta_prime());
    let seeger = kl_inverse(inputs.q, xi);
    let (catoni, c) = if inputs.q == 0.0 {
        // limit C -> infinity
        (-(-xi).exp_m1(), None)
    } else {
        match optimal_catoni_c(inputs.q, seeger) {
            Ok(c) => (catoni_bound(inputs.q, xi, c), Some(c)),
            Err(_) => {
                let (b, c) = catoni_infimum(inputs.q, xi);
                (b, Some(c))
            }
        }
    };
    Ok(BoundReport {
        q: inputs.q,
        kl: inputs.kl,
        n: inputs.n,
        delta: inputs.delta,
        multiplicity: inputs.multiplicity,
        xi,
        seeger_bound: seeger,
        catoni_bound: catoni,
        catoni_c: c,
        zero_one_bound: (2.0 * seeger).min(1.0),
        provenance,
    })
}
