//! Brute-force reference implementations for tests and acceptance runs.
//!
//! Nothing here calls into `aggregate` or `gradients`: the Monte Carlo
//! simulators perturb weights and run sign networks directly, the non-tree
//! aggregate enumerates sign vectors with `psi_layer`-free loops, and the
//! tree oracle builds the decoupled network edge by edge.

use crate::error::{Error, Result};
use crate::gradients::LayerGradients;
use crate::linalg::Matrix;
use crate::network::{NetworkArchitecture, NetworkParams};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::special::erf;

/// Largest decoupled tree the oracles will construct.
pub const TREE_EDGE_CAP: usize = 100_000;

/// Nonzero widths above this make the non-tree double sum too slow.
pub const NONTREE_WIDTH_CAP: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl OracleEstimate {
    /// Mean and standard error of `samples` (at least 2).
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = Welford::default();
        for v in samples {
            acc.push(v);
        }
        acc.finish()
    }

    /// `|value - mean| <= k * std_error`. A zero standard error admits only
    /// rounding-level differences.
    pub fn contains(&self, value: f64, k: f64) -> bool {
        (value - self.mean).abs() <= k * self.std_error + 1e-12
    }

    /// Distance from `value` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        (value - self.mean).abs() / self.std_error.max(f64::MIN_POSITIVE)
    }
}

#[derive(Clone, Default)]
pub struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn finish(&self) -> OracleEstimate {
        assert!(self.n >= 2, "need at least two draws");
        let var = self.m2 / (self.n - 1) as f64;
        OracleEstimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            draws: self.n,
        }
    }
}

fn sign(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn to_f64_layers<F: Real>(theta: &NetworkParams<F>) -> Vec<Matrix<f64>> {
    theta.cast::<f64>().layers().to_vec()
}

/// `E_{theta' ~ N(theta, I)} f_{theta'}(x)` for the sign network itself
/// (no decoupling): every weight is perturbed once per draw.
pub fn mc_bam_aggregate<F: Real>(
    theta: &NetworkParams<F>,
    x: &[F],
    draws: usize,
    rng: &mut RngStream,
) -> Result<OracleEstimate> {
    check_draws(draws)?;
    check_input(theta, x)?;
    let layers = to_f64_layers(theta);
    let x: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
    let mut acc = Welford::default();
    let mut h = Vec::new();
    let mut next = Vec::new();
    for _ in 0..draws {
        h.clear();
        h.extend_from_slice(&x);
        for m in &layers {
            next.clear();
            for i in 0..m.rows() {
                let mut a = 0.0;
                for (j, &hj) in h.iter().enumerate() {
                    a += (m.get(i, j) + rng.standard_normal()) * hj;
                }
                next.push(sign(a));
            }
            std::mem::swap(&mut h, &mut next);
        }
        acc.push(h[0]);
    }
    Ok(acc.finish())
}

/// Expectation of the decoupled tree network with every replicated weight
/// perturbed independently.
pub fn mc_tree_aggregate<F: Real>(
    theta: &NetworkParams<F>,
    x: &[F],
    draws: usize,
    rng: &mut RngStream,
) -> Result<OracleEstimate> {
    check_draws(draws)?;
    check_input(theta, x)?;
    check_tree(theta.architecture())?;
    let layers = to_f64_layers(theta);
    let x: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
    let mut acc = Welford::default();
    for _ in 0..draws {
        acc.push(tree_node(&layers, layers.len(), 0, &x, rng));
    }
    Ok(acc.finish())
}

/// Output of neuron `j` of layer `k` (1-based) in one perturbed tree; each
/// call draws fresh weights for the node and its whole subtree.
fn tree_node(layers: &[Matrix<f64>], k: usize, j: usize, x: &[f64], rng: &mut RngStream) -> f64 {
    let m = &layers[k - 1];
    let mut a = 0.0;
    for i in 0..m.cols() {
        let input = if k == 1 {
            x[i]
        } else {
            tree_node(layers, k - 1, i, x, rng)
        };
        a += (m.get(j, i) + rng.standard_normal()) * input;
    }
    sign(a)
}

/// One edge of the decoupled tree: a copy of weight `W_layer[row][col]`
/// (`layer` is 1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeEdge {
    pub layer: usize,
    pub row: usize,
    pub col: usize,
}

/// All edges of the decoupled tree rooted at the output neuron.
pub fn explicit_tree(arch: &NetworkArchitecture) -> Result<Vec<TreeEdge>> {
    check_tree(arch)?;
    let mut edges = Vec::new();
    fn visit(arch: &NetworkArchitecture, k: usize, j: usize, edges: &mut Vec<TreeEdge>) {
        for i in 0..arch.width(k - 1) {
            edges.push(TreeEdge {
                layer: k,
                row: j,
                col: i,
            });
            if k > 1 {
                visit(arch, k - 1, i, edges);
            }
        }
    }
    visit(arch, arch.depth(), 0, &mut edges);
    Ok(edges)
}

/// `1/2 |eta(theta) - eta(mu)|^2` summed over the explicit tree's edges.
pub fn tree_kl<F: Real>(theta: &NetworkParams<F>, mu: &NetworkParams<F>) -> Result<f64> {
    theta.same_shape(mu)?;
    let edges = explicit_tree(theta.architecture())?;
    Ok(0.5
        * edges
            .iter()
            .map(|e| {
                let d = theta.layer(e.layer - 1).get(e.row, e.col).to_f64_lossy()
                    - mu.layer(e.layer - 1).get(e.row, e.col).to_f64_lossy();
                d * d
            })
            .sum::<f64>())
}

fn check_tree(arch: &NetworkArchitecture) -> Result<()> {
    let edges = arch.tree_edge_count();
    if edges > TREE_EDGE_CAP {
        return Err(Error::IntractableTree { edges });
    }
    Ok(())
}

fn check_draws(draws: usize) -> Result<()> {
    if draws < 2 {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least 2 draws, got {draws}"
        )));
    }
    Ok(())
}

fn check_input<F: Real>(theta: &NetworkParams<F>, x: &[F]) -> Result<()> {
    let d0 = theta.architecture().input_dim();
    if x.len() != d0 {
        return Err(Error::DimensionMismatch {
            expected: d0,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Closed-form aggregate of a two-hidden-layer sign network without the
/// tree decoupling: a joint sum over first-layer signs `s` and second-layer
/// signs `t`,
/// `sum_t erf(w3 . t / sqrt(2 d2)) sum_s Psi(s | x, W1) prod_i (1/2 + t_i/2 erf(w2_i . s / sqrt(2 d1)))`.
pub fn nontree_two_layer_aggregate<F: Real>(theta: &NetworkParams<F>, x: &[F]) -> Result<f64> {
    let arch = theta.architecture();
    if arch.depth() != 3 {
        return Err(Error::InvalidArgument(format!(
            "non-tree aggregate needs two hidden layers, got {}",
            arch.depth() - 1
        )));
    }
    check_input(theta, x)?;
    let (d1, d2) = (arch.width(1), arch.width(2));
    if d1 > NONTREE_WIDTH_CAP || d2 > NONTREE_WIDTH_CAP {
        let (layer, width) = if d1 > NONTREE_WIDTH_CAP {
            (1, d1)
        } else {
            (2, d2)
        };
        return Err(Error::ExactCapacity {
            layer,
            width,
            cap: NONTREE_WIDTH_CAP,
        });
    }
    let l = to_f64_layers(theta);
    let x: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let g1: Vec<f64> = (0..d1)
        .map(|j| {
            if xn == 0.0 {
                0.0
            } else {
                erf(l[0].row(j).iter().zip(&x).map(|(w, v)| w * v).sum::<f64>()
                    / (2f64.sqrt() * xn))
            }
        })
        .collect();
    let bit = |m: usize, i: usize| if m >> i & 1 == 1 { 1.0 } else { -1.0 };
    let mut total = 0.0;
    for t in 0..1usize << d2 {
        let a3: f64 = (0..d2).map(|i| l[2].get(0, i) * bit(t, i)).sum();
        let vote = erf(a3 / (2.0 * d2 as f64).sqrt());
        let mut inner = 0.0;
        for s in 0..1usize << d1 {
            let psi_s: f64 = (0..d1).map(|j| 0.5 + 0.5 * bit(s, j) * g1[j]).product();
            let psi_t: f64 = (0..d2)
                .map(|i| {
                    let a2: f64 = (0..d1).map(|j| l[1].get(i, j) * bit(s, j)).sum();
                    0.5 + 0.5 * bit(t, i) * erf(a2 / (2.0 * d1 as f64).sqrt())
                })
                .product();
            inner += psi_s * psi_t;
        }
        total += vote * inner;
    }
    Ok(total)
}

/// Central differences of `f` in every coordinate of `theta`.
pub fn finite_difference_grad<F: Real>(
    f: impl Fn(&NetworkParams<F>) -> F,
    theta: &NetworkParams<F>,
    h: F,
) -> Result<LayerGradients<F>> {
    if h.partial_cmp(&F::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidArgument(
            "finite-difference step must be positive".into(),
        ));
    }
    let flat = theta.flatten();
    let mut grad = Vec::with_capacity(flat.len());
    let mut probe = flat.clone();
    for i in 0..flat.len() {
        probe[i] = flat[i] + h;
        let up = f(&NetworkParams::from_flat(theta.architecture(), &probe)?);
        probe[i] = flat[i] - h;
        let down = f(&NetworkParams::from_flat(theta.architecture(), &probe)?);
        probe[i] = flat[i];
        grad.push((up - down) / (h + h));
    }
    Ok(LayerGradients {
        grads: NetworkParams::from_flat(theta.architecture(), &grad)?,
        clamped_psi: 0,
    })
}
