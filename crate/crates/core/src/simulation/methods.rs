//! The three estimation routes compared in the experiments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pace::{fit_pace, PaceConfig};
use crate::covariance::{estimate_covariance, CovarianceConfig, CovarianceModel};
use crate::dataset::FunctionalDataset;
use crate::error::{Error, Result};
use crate::gflm::{select_k_fve, DEFAULT_FVE_THRESHOLD};
use crate::mean_variance::{estimate_mean_variance, MeanVarianceEstimate};
use crate::scores::{predict_scores_mc, ScoreConfig, ScoreSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodId {
    Proposed,
    Naive,
    Pace,
}

impl MethodId {
    pub const ALL: [MethodId; 3] = [MethodId::Proposed, MethodId::Naive, MethodId::Pace];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Proposed => "proposed",
            MethodId::Naive => "naive",
            MethodId::Pace => "pace",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proposed" => Ok(MethodId::Proposed),
            "naive" => Ok(MethodId::Naive),
            "pace" => Ok(MethodId::Pace),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Stage-1 bandwidth candidates; `None` uses the default log-spaced set.
    pub mean_candidates: Option<Vec<f64>>,
    pub covariance: CovarianceConfig,
    pub pace: PaceConfig,
    pub scores: ScoreConfig,
    pub fve_threshold: f64,
    /// Fixed number of components; overrides the FVE rule.
    pub k: Option<usize>,
    pub compute_scores: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mean_candidates: None,
            covariance: CovarianceConfig::default(),
            pace: PaceConfig::default(),
            scores: ScoreConfig::default(),
            fve_threshold: DEFAULT_FVE_THRESHOLD,
            k: None,
            compute_scores: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFit {
    pub method: MethodId,
    pub mean_variance: MeanVarianceEstimate,
    pub model: CovarianceModel,
    pub k: usize,
    pub scores: Option<ScoreSet>,
}

/// Number of components: the fixed value if given (capped at the positive
/// spectrum), else the FVE rule.
pub fn choose_k(model: &CovarianceModel, cfg: &PipelineConfig) -> Result<usize> {
    let positive = model.eigen.positive_count();
    match cfg.k {
        Some(0) => Err(Error::Config("K must be at least 1".into())),
        Some(_) if positive == 0 => Err(Error::DegenerateSpectrum),
        Some(k) => Ok(k.min(positive)),
        None => select_k_fve(&model.eigen, cfg.fve_threshold),
    }
}

/// The naive route is the proposed pipeline on the dataset with every flag
/// cleared, so truncated values count as exact.
pub fn run_method(method: MethodId, ds: &FunctionalDataset, grid: &[f64], cfg: &PipelineConfig) -> Result<MethodFit> {
    let (mv, model, data) = match method {
        MethodId::Proposed => {
            let (mv, model) = proposed_surfaces(ds, grid, cfg)?;
            (mv, model, None)
        }
        MethodId::Naive => {
            let plain = ds.ignoring_truncation();
            let (mv, model) = proposed_surfaces(&plain, grid, cfg)?;
            (mv, model, Some(plain))
        }
        MethodId::Pace => {
            let plain = ds.ignoring_truncation();
            let (mv, model) = fit_pace(&plain, grid, &cfg.pace)?;
            (mv, model, Some(plain))
        }
    };
    let k = choose_k(&model, cfg)?;
    let scores = if cfg.compute_scores {
        Some(predict_scores_mc(
            data.as_ref().unwrap_or(ds),
            &model,
            &mv,
            k,
            &cfg.scores,
        )?)
    } else {
        None
    };
    Ok(MethodFit {
        method,
        mean_variance: mv,
        model,
        k,
        scores,
    })
}

/// Scores for new data under an already fitted method (flags are cleared
/// for the truncation-unaware routes).
pub fn predict_with(fit: &MethodFit, ds: &FunctionalDataset, cfg: &ScoreConfig) -> Result<ScoreSet> {
    match fit.method {
        MethodId::Proposed => predict_scores_mc(ds, &fit.model, &fit.mean_variance, fit.k, cfg),
        MethodId::Naive | MethodId::Pace => {
            predict_scores_mc(&ds.ignoring_truncation(), &fit.model, &fit.mean_variance, fit.k, cfg)
        }
    }
}

fn proposed_surfaces(
    ds: &FunctionalDataset,
    grid: &[f64],
    cfg: &PipelineConfig,
) -> Result<(MeanVarianceEstimate, CovarianceModel)> {
    let (mv, _) = estimate_mean_variance(ds, grid, cfg.mean_candidates.as_deref())?;
    let model = estimate_covariance(ds, &mv, grid, &cfg.covariance)?;
    Ok((mv, model))
}
