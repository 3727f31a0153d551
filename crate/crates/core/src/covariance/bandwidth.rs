//! Covariance bandwidth choice by the Gaussian pseudo-likelihood of each
//! unit's untruncated values.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pgd::{fit_covariance_pgd, PgdConfig, PgdFit};
use crate::dataset::FunctionalDataset;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mean_variance::MeanVarianceEstimate;
use crate::numeric::{interp, SymMatrix, LN_SQRT_2PI};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLikTable {
    pub candidates: Vec<f64>,
    pub log_pseudo_likelihood: Vec<f64>,
}

/// `Σᵢ log p₀{Wᵢ(Tᵢ⁰)}` with `p₀` the Gaussian density under `μ̂` and the
/// bilinearly interpolated `Σ̃̂`. Units without untruncated points add 0.
pub fn pseudo_log_likelihood(
    ds: &FunctionalDataset,
    mv: &MeanVarianceEstimate,
    grid: &[f64],
    sigma_tilde: &SymMatrix,
) -> f64 {
    let mut total = 0.0;
    for tr in &ds.trajectories {
        let pts: Vec<(f64, f64)> = tr.untruncated().map(|p| (p.time, p.value)).collect();
        if pts.is_empty() {
            debug!("unit {} has no untruncated points; contributes 0", tr.unit_id);
            continue;
        }
        let n = pts.len();
        let resid = nalgebra::DVector::from_fn(n, |i, _| pts[i].1 - mv.mu_at(pts[i].0));
        let cov = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            interp::interp_bilinear(grid, |a, b| sigma_tilde[(a, b)], pts[i].0, pts[j].0)
        });
        total += gaussian_log_density(&resid, cov);
    }
    total
}

/// Log density of a zero-mean Gaussian, adding a small ridge if the
/// covariance is numerically singular.
fn gaussian_log_density(x: &nalgebra::DVector<f64>, mut cov: nalgebra::DMatrix<f64>) -> f64 {
    let n = x.len();
    let scale = (0..n).map(|i| cov[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    loop {
        if let Some(chol) = cov.clone().cholesky() {
            let z = chol
                .l()
                .solve_lower_triangular(x)
                .expect("triangular factor is nonsingular");
            let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
            return -(n as f64) * LN_SQRT_2PI - 0.5 * log_det - 0.5 * z.norm_squared();
        }
        let add = if ridge == 0.0 { 1e-10 * scale } else { ridge * 9.0 };
        for i in 0..n {
            cov[(i, i)] += add;
        }
        ridge += add;
    }
}

/// Fits Σ̃ at every candidate and keeps the one with the largest
/// pseudo-likelihood; ties go to the smaller bandwidth.
pub fn select_cov_bandwidth(
    ds: &FunctionalDataset,
    mv: &MeanVarianceEstimate,
    grid: &[f64],
    candidates: &[f64],
    cfg: &PgdConfig,
) -> Result<(f64, PseudoLikTable)> {
    let (h, table, _) = select_with_fit(ds, mv, grid, candidates, cfg)?;
    Ok((h, table))
}

pub(crate) fn select_with_fit(
    ds: &FunctionalDataset,
    mv: &MeanVarianceEstimate,
    grid: &[f64],
    candidates: &[f64],
    cfg: &PgdConfig,
) -> Result<(f64, PseudoLikTable, PgdFit)> {
    if candidates.is_empty() {
        return Err(Error::Config("bandwidth candidate list is empty".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let fits: Vec<Result<(f64, PgdFit)>> = sorted
        .par_iter()
        .map(|&h| {
            let k = KernelSpec::gaussian(h)?;
            let fit = fit_covariance_pgd(ds, mv, grid, &k, cfg)?;
            Ok((pseudo_log_likelihood(ds, mv, grid, &fit.sigma_tilde), fit))
        })
        .collect();
    let mut scores = Vec::with_capacity(sorted.len());
    let mut best: Option<(usize, f64, PgdFit)> = None;
    for (i, r) in fits.into_iter().enumerate() {
        let (score, fit) = r?;
        scores.push(score);
        if best.as_ref().is_none_or(|b| score > b.1) {
            best = Some((i, score, fit));
        }
    }
    let (i, _, fit) = best.expect("at least one candidate");
    Ok((
        sorted[i],
        PseudoLikTable {
            candidates: sorted,
            log_pseudo_likelihood: scores,
        },
        fit,
    ))
}
