use std::path::Path;

use serde::{Deserialize, Serialize};
use trunc_fpca::covariance::PgdConfig;
use trunc_fpca::scores::ScoreConfig;

use crate::error::CliError;

/// Optional run parameters loaded from `--config`; unset fields fall back
/// to defaults, and command-line flags override both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub grid_size: Option<usize>,
    pub mean_bandwidths: Option<Vec<f64>>,
    pub cov_bandwidth: Option<f64>,
    pub cov_multiples: Option<Vec<f64>>,
    pub pgd: Option<PgdConfig>,
    pub scores: Option<ScoreConfig>,
    pub fve_threshold: Option<f64>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub g: Option<usize>,
    pub replicates: Option<usize>,
    pub link: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = crate::output::read_input(path)?;
        let cfg: RunConfig = serde_json::from_slice(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if let (Some(a), Some(b)) = (self.lower, self.upper) {
            if !(a < b) {
                return bad(format!("lower bound {a} must be below upper bound {b}"));
            }
        }
        if let Some(g) = self.grid_size {
            check_grid_size(g)?;
        }
        for list in [&self.mean_bandwidths, &self.cov_multiples].into_iter().flatten() {
            check_positive_list(list)?;
        }
        if let Some(h) = self.cov_bandwidth {
            check_positive("covariance bandwidth", h)?;
        }
        if let Some(p) = &self.pgd {
            p.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        }
        if let Some(s) = &self.scores {
            check_m(s.m)?;
        }
        if let Some(f) = self.fve_threshold {
            check_fve(f)?;
        }
        if self.k == Some(0) {
            return bad("K must be at least 1".into());
        }
        if self.replicates == Some(0) {
            return bad("replicates must be at least 1".into());
        }
        if matches!(self.n, Some(n) if n < 2) {
            return bad("n must be at least 2".into());
        }
        if matches!(self.g, Some(g) if g < 3) {
            return bad("g must be at least 3".into());
        }
        Ok(())
    }
}

pub fn check_grid_size(g: usize) -> Result<(), CliError> {
    if g < 2 {
        return Err(CliError::Validation(format!("grid size must be at least 2, got {g}")));
    }
    Ok(())
}

pub fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::Validation(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

pub fn check_positive_list(v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::Validation("candidate list is empty".into()));
    }
    v.iter().try_for_each(|&h| check_positive("bandwidth", h))
}

pub fn check_m(m: usize) -> Result<(), CliError> {
    if m == 0 {
        return Err(CliError::Validation(
            "Monte Carlo sample count must be at least 1".into(),
        ));
    }
    Ok(())
}

pub fn check_fve(f: f64) -> Result<(), CliError> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(CliError::Validation(format!(
            "FVE threshold must be in (0, 1], got {f}"
        )));
    }
    Ok(())
}
