//! Gaussian smoothing kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::normal_pdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
}

/// `A_h(u) = φ(u/h)/h`; the bivariate kernel is the product `A_h(u)A_h(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::domain(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KernelSpec {
            family: KernelFamily::Gaussian,
            bandwidth,
        })
    }

    #[inline]
    pub fn weight(&self, u: f64) -> f64 {
        normal_pdf(u / self.bandwidth) / self.bandwidth
    }

    #[inline]
    pub fn weight2(&self, u: f64, v: f64) -> f64 {
        self.weight(u) * self.weight(v)
    }

    pub fn widened(&self, factor: f64) -> Self {
        KernelSpec {
            family: self.family,
            bandwidth: self.bandwidth * factor,
        }
    }
}

/// Mean gap between neighbouring gridpoints (1 for a single point).
pub fn mean_grid_gap(grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        return 1.0;
    }
    (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
}

/// `count` log-spaced values between `lo` and `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp())
            .collect(),
    }
}

/// Thirteen log-spaced candidates (ratio 2^{1/3}) between a quarter of a
/// mean grid gap and four gaps.
pub fn default_bandwidth_candidates(grid: &[f64]) -> Vec<f64> {
    let gap = mean_grid_gap(grid);
    log_spaced(0.25 * gap, 4.0 * gap, 13)
}
