//! Stage 2: latent covariance of the untruncated process, its diagonal
//! decomposition into signal and noise, and the eigen system.

mod bandwidth;
mod loglik;
mod pgd;
mod smooth;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use bandwidth::{pseudo_log_likelihood, select_cov_bandwidth, PseudoLikTable};
pub use loglik::{offdiag_local_loglik, MixedConditioning};
pub use pgd::{fit_covariance_pgd, pairwise_sample_covariance, PgdConfig, PgdFit, StepSchedule};
pub use smooth::smooth_diagonal;

use crate::dataset::FunctionalDataset;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mean_variance::MeanVarianceEstimate;
use crate::numeric::{check_grid, eigen_decompose_psd, EigenSystem, SymMatrix, PSD_TOL};

/// How the covariance bandwidth is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    Fixed(f64),
    /// Absolute candidates, chosen by pseudo-likelihood.
    Candidates(Vec<f64>),
    /// Multiples of the stage-1 bandwidth, chosen by pseudo-likelihood.
    Multiples(Vec<f64>),
}

impl Default for BandwidthChoice {
    fn default() -> Self {
        BandwidthChoice::Multiples(vec![1.0, 1.5, 2.0])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovarianceConfig {
    pub pgd: PgdConfig,
    pub bandwidth: BandwidthChoice,
}

/// Optimizer outcome kept with a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdSummary {
    pub sweeps: usize,
    pub converged: bool,
    pub max_change: f64,
    pub initial_step: f64,
    pub final_step: f64,
}

impl From<&PgdFit> for PgdSummary {
    fn from(f: &PgdFit) -> Self {
        PgdSummary {
            sweeps: f.sweeps,
            converged: f.converged,
            max_change: f.max_change,
            initial_step: f.initial_step,
            final_step: f.final_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub grid: Vec<f64>,
    /// Σ̃̂: covariance of the observed (noisy) process; diagonal = σ̃̂².
    pub sigma_tilde: SymMatrix,
    /// Σ̂: smooth latent covariance.
    pub sigma: SymMatrix,
    /// σ̂²(t) = Σ̃̂(t,t) − Σ̂(t,t).
    pub noise_var: Vec<f64>,
    pub eigen: EigenSystem,
    pub bandwidth: f64,
    pub mean_bandwidth: f64,
    pub pgd: Option<PgdSummary>,
    pub pseudo_likelihood: Option<PseudoLikTable>,
    pub pgd_config: PgdConfig,
}

impl CovarianceModel {
    /// σ̂²(t)/σ̃̂²(t): the share of observed variance that is noise.
    pub fn noise_fraction(&self) -> Vec<f64> {
        self.noise_var
            .iter()
            .zip(self.sigma_tilde.diagonal())
            .map(|(&n, t)| if t > 0.0 { (n / t).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    }

    /// Checks the structural guarantees of a fitted model.
    pub fn check_invariants(&self) -> Result<()> {
        for m in [&self.sigma_tilde, &self.sigma] {
            let min = m.min_eigenvalue();
            if min < -PSD_TOL {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
        }
        for (i, &n) in self.noise_var.iter().enumerate() {
            let gap = self.sigma_tilde[(i, i)] - self.sigma[(i, i)];
            if n < 0.0 || (gap - n).abs() > 1e-9 * self.sigma_tilde[(i, i)].abs().max(1.0) {
                return Err(Error::domain(format!("noise variance inconsistent at gridpoint {i}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::domain(format!("serializing model: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Square CSV: a header row `t,<grid...>` then one row per gridpoint.
pub fn write_matrix_csv<W: Write>(grid: &[f64], m: &SymMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::domain(format!("writing matrix csv: {e}"));
    let mut header = vec!["t".to_string()];
    header.extend(grid.iter().map(|t| t.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for (i, t) in grid.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend((0..grid.len()).map(|j| m[(i, j)].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::domain(format!("writing matrix csv: {e}")))
}

/// PGD for Σ̃̂ at bandwidth `k`, diagonal smoothing, and eigendecomposition.
pub fn build_covariance_model(
    ds: &FunctionalDataset,
    mv: &MeanVarianceEstimate,
    grid: &[f64],
    k: &KernelSpec,
    cfg: &PgdConfig,
) -> Result<CovarianceModel> {
    check_grid(grid)?;
    let fit = fit_covariance_pgd(ds, mv, grid, k, cfg)?;
    assemble(ds, mv, grid, k.bandwidth, fit, None, cfg)
}

/// Chooses the bandwidth per `cfg.bandwidth` and builds the model.
pub fn estimate_covariance(
    ds: &FunctionalDataset,
    mv: &MeanVarianceEstimate,
    grid: &[f64],
    cfg: &CovarianceConfig,
) -> Result<CovarianceModel> {
    check_grid(grid)?;
    let candidates = match &cfg.bandwidth {
        BandwidthChoice::Fixed(h) => {
            return build_covariance_model(ds, mv, grid, &KernelSpec::gaussian(*h)?, &cfg.pgd);
        }
        BandwidthChoice::Candidates(c) => c.clone(),
        BandwidthChoice::Multiples(m) => m.iter().map(|f| f * mv.bandwidth).collect(),
    };
    let (h, table, fit) = bandwidth::select_with_fit(ds, mv, grid, &candidates, &cfg.pgd)?;
    assemble(ds, mv, grid, h, fit, Some(table), &cfg.pgd)
}

fn assemble(
    ds: &FunctionalDataset,
    mv: &MeanVarianceEstimate,
    grid: &[f64],
    h: f64,
    fit: PgdFit,
    table: Option<PseudoLikTable>,
    cfg: &PgdConfig,
) -> Result<CovarianceModel> {
    // The diagonal smoother reuses the stage-1 bandwidth.
    let k_mean = KernelSpec::gaussian(mv.bandwidth)?;
    let (sigma, noise_var) = smooth_diagonal(&fit.sigma_tilde, ds, mv, grid, &k_mean)?;
    let eigen = eigen_decompose_psd(&sigma, grid)?;
    Ok(CovarianceModel {
        grid: grid.to_vec(),
        pgd: Some(PgdSummary::from(&fit)),
        sigma_tilde: fit.sigma_tilde,
        sigma,
        noise_var,
        eigen,
        bandwidth: h,
        mean_bandwidth: mv.bandwidth,
        pseudo_likelihood: table,
        pgd_config: *cfg,
    })
}
