//! Diagonal of the latent covariance by a rotated local-quadratic smoother
//! of the off-diagonal surface, then the signal/noise split.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use crate::dataset::FunctionalDataset;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mean_variance::MeanVarianceEstimate;
use crate::numeric::{interp, SymMatrix};

const WIDEN_FACTOR: f64 = 2.0;
const MAX_WIDEN: usize = 3;
/// Cells whose weight falls below this fraction of the largest are ignored
/// when counting effective support.
const EFFECTIVE_WEIGHT: f64 = 1e-6;

/// Off-diagonal cells `(a, b)`, `a ≠ b`, with how many ordered observation
/// pairs landed there after snapping times to the nearest gridpoint.
fn pair_counts(ds: &FunctionalDataset, grid: &[f64]) -> BTreeMap<(usize, usize), f64> {
    let mut counts = BTreeMap::new();
    for tr in &ds.trajectories {
        let cells: Vec<usize> = tr.points.iter().map(|p| interp::nearest_index(grid, p.time)).collect();
        for (j, &a) in cells.iter().enumerate() {
            for (jp, &b) in cells.iter().enumerate() {
                if j != jp && a != b {
                    *counts.entry((a, b)).or_insert(0.0) += 1.0;
                }
            }
        }
    }
    counts
}

/// `β̂₀` at gridpoint `d`: weighted least squares of `Σ̃̂(a, b)` on
/// `β₀ + β₁(u − u₀) + β₂v²` in coordinates rotated by π/4.
fn local_fit(
    sigma_tilde: &SymMatrix,
    grid: &[f64],
    counts: &BTreeMap<(usize, usize), f64>,
    d: usize,
    k: &KernelSpec,
) -> Option<f64> {
    let t0 = grid[d];
    let u0 = std::f64::consts::SQRT_2 * t0;
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    let mut weights = Vec::with_capacity(counts.len());
    for (&(a, b), &n) in counts {
        let (s, t) = (grid[a], grid[b]);
        let w = n * k.weight(t0 - s) * k.weight(t0 - t);
        if !(w > 0.0) {
            continue;
        }
        weights.push(w);
        let u = (s + t) / std::f64::consts::SQRT_2;
        let v = (t - s) / std::f64::consts::SQRT_2;
        let x = Vector3::new(1.0, u - u0, v * v);
        xtx += w * x * x.transpose();
        xty += w * sigma_tilde[(a, b)] * x;
    }
    let max_w = weights.iter().copied().fold(0.0, f64::max);
    let effective = weights.iter().filter(|&&w| w >= EFFECTIVE_WEIGHT * max_w).count();
    if effective < 3 {
        return None;
    }
    // Scale columns before judging rank.
    let scale = Vector3::from_fn(|i, _| xtx[(i, i)].sqrt().max(f64::MIN_POSITIVE));
    let scaled = Matrix3::from_fn(|i, j| xtx[(i, j)] / (scale[i] * scale[j]));
    let eig = scaled.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 1e-12 * hi) {
        return None;
    }
    let beta = scaled.cholesky()?.solve(&Vector3::from_fn(|i, _| xty[i] / scale[i]));
    Some(beta[0] / scale[0])
}

/// Smooth latent covariance `Σ̂` and noise variance `σ̂²` from `Σ̃̂`.
///
/// `Σ̂(t,t)` is the local intercept clamped to `[0, σ̃̂²(t)]` (stage-1 values); off-diagonals are
/// those of `Σ̃̂`. Negative eigenvalues are then clamped to zero, and any
/// diagonal pushed above `σ̃̂²` by the clamp is scaled back by a diagonal
/// congruence, which keeps the matrix PSD.
pub fn smooth_diagonal(
    sigma_tilde: &SymMatrix,
    ds: &FunctionalDataset,
    mv: &MeanVarianceEstimate,
    grid: &[f64],
    k: &KernelSpec,
) -> Result<(SymMatrix, Vec<f64>)> {
    let g = grid.len();
    if sigma_tilde.dim() != g {
        return Err(Error::domain("sigma_tilde does not match the grid"));
    }
    let total: Vec<f64> = grid.iter().map(|&t| mv.sigma_tilde_sq_at(t)).collect();
    if g == 1 {
        return Ok((sigma_tilde.clone(), vec![0.0]));
    }
    let counts = pair_counts(ds, grid);
    let mut failed = Vec::new();
    let mut diag = vec![0.0; g];
    for d in 0..g {
        let mut kernel = *k;
        let mut fit = None;
        for attempt in 0..=MAX_WIDEN {
            if attempt > 0 {
                kernel = kernel.widened(WIDEN_FACTOR);
            }
            fit = local_fit(sigma_tilde, grid, &counts, d, &kernel);
            if fit.is_some() {
                break;
            }
        }
        match fit {
            Some(b0) => diag[d] = b0.clamp(0.0, total[d]),
            None => failed.push(grid[d]),
        }
    }
    if !failed.is_empty() {
        return Err(Error::CurveFit { gridpoints: failed });
    }

    let mut sigma = sigma_tilde.clone();
    for (d, &v) in diag.iter().enumerate() {
        sigma.set(d, d, v);
    }
    let clamped = sigma.clamp_eigenvalues(0.0);
    let scale: Vec<f64> = (0..g)
        .map(|i| {
            let cur = clamped[(i, i)];
            if cur > total[i] && cur > 0.0 {
                (total[i] / cur).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let sigma = SymMatrix::from_fn(g, |i, j| scale[i] * clamped[(i, j)] * scale[j]);
    let noise: Vec<f64> = (0..g).map(|i| (total[i] - sigma[(i, i)]).max(0.0)).collect();
    Ok((sigma, noise))
}
