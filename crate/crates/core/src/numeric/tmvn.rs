//! Truncated multivariate normal sampling by coordinate-wise Gibbs updates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normal::{phi_cdf, quantile_unchecked};
use super::SymMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig { burn_in: 50, thin: 1 }
    }
}

/// Draws `m` samples (rows of the returned matrix) from `N(mean, cov)`
/// restricted to the box `lower < x < upper`.
pub fn sample_truncated_mvn(
    mean: &DVector<f64>,
    cov: &SymMatrix,
    lower: &[f64],
    upper: &[f64],
    m: usize,
    seed: u64,
    cfg: GibbsConfig,
) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_truncated_mvn_with(mean, cov, lower, upper, m, &mut rng, cfg)
}

pub fn sample_truncated_mvn_with<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &SymMatrix,
    lower: &[f64],
    upper: &[f64],
    m: usize,
    rng: &mut R,
    cfg: GibbsConfig,
) -> Result<DMatrix<f64>> {
    let d = mean.len();
    if cov.dim() != d || lower.len() != d || upper.len() != d {
        return Err(Error::domain("truncated normal: dimension mismatch"));
    }
    if m == 0 {
        return Err(Error::domain("truncated normal: m must be at least 1"));
    }
    if cfg.thin == 0 {
        return Err(Error::Config("thinning must be at least 1".into()));
    }
    for j in 0..d {
        if lower[j].is_nan() || upper[j].is_nan() || lower[j] >= upper[j] {
            return Err(Error::DegenerateRegion { coordinate: j });
        }
    }
    let precision = robust_inverse(cov)?;

    let mut x: Vec<f64> = (0..d)
        .map(|j| inside(mean[j].clamp(lower[j], upper[j]), lower[j], upper[j]))
        .collect();
    let mut out = DMatrix::zeros(m, d);
    let total = cfg.burn_in + m * cfg.thin;
    let mut kept = 0;
    for sweep in 0..total {
        for j in 0..d {
            let q = precision[(j, j)];
            let mut shift = 0.0;
            for k in 0..d {
                if k != j {
                    shift += precision[(j, k)] * (x[k] - mean[k]);
                }
            }
            let cond_mean = mean[j] - shift / q;
            let cond_sd = (1.0 / q).sqrt();
            x[j] = truncated_normal(rng, cond_mean, cond_sd, lower[j], upper[j])
                .ok_or(Error::DegenerateRegion { coordinate: j })?;
        }
        if sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == cfg.thin - 1 {
            for j in 0..d {
                out[(kept, j)] = x[j];
            }
            kept += 1;
        }
    }
    Ok(out)
}

fn robust_inverse(cov: &SymMatrix) -> Result<DMatrix<f64>> {
    let scale = cov.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..8 {
        let mut a = cov.as_matrix().clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(chol) = a.cholesky() {
            return Ok(chol.inverse());
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 100.0 };
    }
    Err(Error::NotPsd {
        min_eigenvalue: cov.min_eigenvalue(),
    })
}

/// Nudges `v` strictly inside `(lo, hi)`.
fn inside(v: f64, lo: f64, hi: f64) -> f64 {
    let mut v = v;
    if v <= lo {
        v = lo.next_up();
    }
    if v >= hi {
        v = hi.next_down();
    }
    v
}

/// Univariate `N(mean, sd²)` restricted to `(lo, hi)`.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> Option<f64> {
    if !(sd > 0.0) || !mean.is_finite() {
        return None;
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let z = standard_truncated(rng, a, b)?;
    Some(inside(mean + sd * z, lo, hi))
}

fn standard_truncated<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Option<f64> {
    if !(a < b) {
        return None;
    }
    if a > 0.0 {
        // Work in the lower tail where Φ keeps relative precision.
        return standard_truncated(rng, -b, -a).map(|z| -z);
    }
    let pa = phi_cdf(a);
    let pb = phi_cdf(b);
    if pb > 1e-300 && pb - pa > 0.0 {
        let u: f64 = rng.random();
        let z = quantile_unchecked(pa + u * (pb - pa));
        if z.is_finite() {
            return Some(z.clamp(a, b));
        }
    }
    // Interval deep in the left tail: mirror and use tail rejection.
    tail_rejection(rng, -b, -a).map(|z| -z)
}

/// Exact sampler for `N(0,1)` on `[c, d]` with `c` large and positive.
fn tail_rejection<R: Rng + ?Sized>(rng: &mut R, c: f64, d: f64) -> Option<f64> {
    if !(c > 0.0) || !(c < d) {
        return None;
    }
    if d - c < 1.0 / c {
        // Narrow window: uniform proposal, accept ∝ exp(-(x² - c²)/2).
        for _ in 0..100_000 {
            let x = c + (d - c) * rng.random::<f64>();
            if rng.random::<f64>() < (-0.5 * (x * x - c * c)).exp() {
                return Some(x);
            }
        }
        return None;
    }
    // Robert (1995) translated-exponential proposal.
    let rate = 0.5 * (c + (c * c + 4.0).sqrt());
    for _ in 0..100_000 {
        let e: f64 = -rng.random::<f64>().ln() / rate;
        let x = c + e;
        if x >= d {
            continue;
        }
        if rng.random::<f64>() <= (-0.5 * (x - rate) * (x - rate)).exp() {
            return Some(x);
        }
    }
    None
}
