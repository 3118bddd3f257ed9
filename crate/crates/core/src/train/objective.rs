//! Training objectives over `(theta, gamma)` with `C = exp(gamma)`.

use crate::aggregate::ForwardMode;
use crate::error::Result;
use crate::gradients::{loss_gradient, LayerGradients};
use crate::pacbayes::{complexity_term, kl_network_divergence, kl_network_gradient};
use crate::rng::RngStream;
use crate::Params;

#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    /// Catoni bound with the batch linear loss standing in for the empirical risk.
    PacBound {
        n: usize,
        delta_prime: f64,
        prior: Params,
    },
    /// Linear loss plus `rho/2 |theta|^2`.
    LinearL2 { weight_decay: f64 },
}

#[derive(Clone, Debug)]
pub struct ObjectiveEval {
    pub value: f64,
    /// Batch-mean linear loss.
    pub loss: f64,
    pub kl: Option<f64>,
    pub grads: LayerGradients<f64>,
    pub grad_gamma: f64,
}

/// Partial derivatives of `B(q, xi, C) = (1 - e^{-Cq-xi}) / (1 - e^{-C})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatoniPartials {
    pub value: f64,
    pub d_q: f64,
    pub d_xi: f64,
    pub d_c: f64,
}

pub fn catoni_partials(q: f64, xi: f64, c: f64) -> CatoniPartials {
    let e = (-(c * q + xi)).exp();
    let one_minus_e = -(-(c * q + xi)).exp_m1();
    let denom = -(-c).exp_m1();
    let e_c = (-c).exp();
    CatoniPartials {
        value: one_minus_e / denom,
        d_q: c * e / denom,
        d_xi: e / denom,
        d_c: (q * e * denom - one_minus_e * e_c) / (denom * denom),
    }
}

pub fn objective_value_and_grad(
    params: &Params,
    gamma: f64,
    batch: &[(&[f64], f64)],
    objective: &Objective,
    mode: ForwardMode,
    rng: &RngStream,
) -> Result<ObjectiveEval> {
    let (loss, mut grads) = loss_gradient(params, batch, mode, rng)?;
    match objective {
        Objective::LinearL2 { weight_decay } => {
            let rho = *weight_decay;
            let mut value = loss;
            if rho > 0.0 {
                value += 0.5 * rho * params.sq_norm();
                grads.add_scaled(
                    rho,
                    &LayerGradients {
                        grads: params.clone(),
                        clamped_psi: 0,
                    },
                )?;
            }
            Ok(ObjectiveEval {
                value,
                loss,
                kl: None,
                grads,
                grad_gamma: 0.0,
            })
        }
        Objective::PacBound {
            n,
            delta_prime,
            prior,
        } => {
            let kl = kl_network_divergence(params, prior)?;
            let xi = complexity_term(kl, *n, *delta_prime);
            let c = gamma.exp();
            let p = catoni_partials(loss, xi, c);
            grads.scale(p.d_q);
            let kl_grad = LayerGradients {
                grads: kl_network_gradient(params, prior)?,
                clamped_psi: 0,
            };
            grads.add_scaled(p.d_xi / *n as f64, &kl_grad)?;
            Ok(ObjectiveEval {
                value: p.value,
                loss,
                kl: Some(kl),
                grads,
                grad_gamma: p.d_c * c,
            })
        }
    }
}
