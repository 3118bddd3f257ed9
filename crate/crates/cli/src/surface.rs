//! Decision-surface grids for two-dimensional inputs.

use std::fmt::Write as _;
use std::path::Path;

use pbgnet::aggregate::{aggregate_forward_exact, vote_decomposition};
use pbgnet::network::bam_forward;
use pbgnet::train::{Checkpoint, Model};

use crate::error::{CliError, CliResult};

/// Per-representation columns are emitted up to this hidden width.
pub const MAX_VOTE_WIDTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceGrid {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
    pub resolution: usize,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        Self {
            x1: (-2.0, 2.0),
            x2: (-2.0, 2.0),
            resolution: 101,
        }
    }
}

fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (range.0 + range.1)];
    }
    (0..n)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
        .collect()
}

fn sign_label(values: &[i8]) -> String {
    values
        .iter()
        .map(|&v| if v > 0 { '+' } else { '-' })
        .collect()
}

/// CSV with `x1, x2, G, f` and, for one hidden layer of width at most 3,
/// `psi_<s>` and `vote_<s>` per sign vector `s`, where `vote_<s>` is the
/// weighted contribution `Psi(s) * erf(...)`; these sum to `G`.
pub fn surface_csv(model: &Model, grid: &SurfaceGrid) -> CliResult<String> {
    let Model::Bam { params } = model else {
        return Err(CliError::Usage(
            "surface needs an aggregated network checkpoint".into(),
        ));
    };
    let arch = params.architecture();
    if arch.input_dim() != 2 {
        return Err(CliError::Usage(format!(
            "surface needs 2 input features, network has {}",
            arch.input_dim()
        )));
    }
    if grid.resolution == 0 {
        return Err(CliError::Usage("resolution must be positive".into()));
    }
    let votes = arch.depth() == 2 && arch.width(1) <= MAX_VOTE_WIDTH;
    let mut out = String::from("x1,x2,G,f");
    if votes {
        for s in pbgnet::network::SignVector::enumerate(arch.width(1)) {
            write!(out, ",psi_{}", sign_label(s.values())).unwrap();
        }
        for s in pbgnet::network::SignVector::enumerate(arch.width(1)) {
            write!(out, ",vote_{}", sign_label(s.values())).unwrap();
        }
    }
    out.push('\n');
    for &b in &axis(grid.x2, grid.resolution) {
        for &a in &axis(grid.x1, grid.resolution) {
            let x = [a, b];
            let g = aggregate_forward_exact(params, &x)?.output();
            let f = bam_forward(params, &x)?;
            write!(out, "{a},{b},{g},{f}").unwrap();
            if votes {
                let terms = vote_decomposition(params, &x)?;
                for t in &terms {
                    write!(out, ",{}", t.weight).unwrap();
                }
                for t in &terms {
                    write!(out, ",{}", t.weight * t.vote).unwrap();
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn cmd_surface(checkpoint: &Path, grid: &SurfaceGrid) -> CliResult<String> {
    surface_csv(&Checkpoint::load(checkpoint)?.model, grid)
}
