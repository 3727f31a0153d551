//! Monte Carlo orchestration over replicates, methods and scenarios.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cases::{case5_phi1, case_structure, generate_with, CaseStructure, SimCase, DEFAULT_STRUCTURE_SEED};
use super::methods::{predict_with, run_method, MethodFit, MethodId, PipelineConfig};
use super::metrics::{accuracy, mse, surface_metrics};
use crate::error::{Error, Result};
use crate::gflm::{fit_gflm, predict_gflm, Link};
use crate::scores::ScoreConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Surfaces,
    GflmIdentity,
    GflmLogit,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Surfaces => "surfaces",
            Scenario::GflmIdentity => "gflm_identity",
            Scenario::GflmLogit => "gflm_logit",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "surfaces" => Ok(Scenario::Surfaces),
            "gflm_identity" | "identity" => Ok(Scenario::GflmIdentity),
            "gflm_logit" | "logit" => Ok(Scenario::GflmLogit),
            _ => Err(Error::Config(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case_id: u8,
    pub n: usize,
    pub g: usize,
    pub replicates: usize,
    pub methods: Vec<MethodId>,
    pub scenario: Scenario,
    pub seed: u64,
    pub structure_seed: u64,
    pub pipeline: PipelineConfig,
}

impl ExperimentConfig {
    pub fn new(case_id: u8, scenario: Scenario, replicates: usize, seed: u64) -> Self {
        ExperimentConfig {
            case_id,
            n: 100,
            g: 15,
            replicates,
            methods: MethodId::ALL.to_vec(),
            scenario,
            seed,
            structure_seed: DEFAULT_STRUCTURE_SEED,
            pipeline: PipelineConfig::default(),
        }
    }

    fn sim_case(&self, seed: u64) -> SimCase {
        SimCase {
            n: self.n,
            g: self.g,
            seed,
            structure_seed: self.structure_seed,
            ..SimCase::new(self.case_id, self.n, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        self.sim_case(self.seed).validate()
    }

    /// Seed of replicate `r`, distinct across cases and scenarios.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        let stream = (self.case_id as u64) << 56 | (self.scenario as u64) << 48 | r as u64;
        mix(self.seed, stream)
    }
}

fn mix(seed: u64, stream: u64) -> u64 {
    crate::scores::unit_seed(seed, stream)
}

const TEST_SET_STREAM: u64 = 0x7E57;
const SCORE_STREAM: u64 = 0x5C0E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub method: MethodId,
    pub metrics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub case_id: u8,
    pub scenario: Scenario,
    pub method: MethodId,
    pub metric: String,
    pub mean: f64,
    /// Monte Carlo standard error of the mean.
    pub std_error: f64,
    pub replicates: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicateRecord>,
    pub summary: Vec<MetricSummary>,
}

impl ExperimentResult {
    pub fn get(&self, method: MethodId, metric: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|s| s.method == method && s.metric == metric)
    }

    /// Per-replicate values of one metric, in replicate order (failures skipped).
    pub fn values(&self, method: MethodId, metric: &str) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.metrics.get(metric).map(|&v| (r.replicate, v)))
            .collect()
    }

    pub fn failures(&self, method: MethodId) -> usize {
        self.records
            .iter()
            .filter(|r| r.method == method && r.error.is_some())
            .count()
    }
}

/// Reference leading eigenfunction on the grid: `−√2 cos(πt)` for Case 5,
/// otherwise the leading eigenvector of the true covariance.
pub fn reference_phi1(structure: &CaseStructure, case_id: u8) -> Vec<f64> {
    if case_id == 5 {
        structure.grid.iter().map(|&t| case5_phi1(t)).collect()
    } else {
        structure.eigen.eigenvectors.first().cloned().unwrap_or_default()
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let structure = case_structure(&cfg.sim_case(cfg.seed))?;
    let phi1 = reference_phi1(&structure, cfg.case_id);
    let mut pipeline = cfg.pipeline.clone();
    pipeline.compute_scores = cfg.scenario != Scenario::Surfaces;
    info!(
        "case {} {}: {} replicates, n = {}, methods {:?}",
        cfg.case_id, cfg.scenario, cfg.replicates, cfg.n, cfg.methods
    );
    let per_rep: Vec<Vec<ReplicateRecord>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &pipeline, &structure, &phi1, r))
        .collect();
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let summary = summarize(cfg, &records);
    Ok(ExperimentResult {
        config: cfg.clone(),
        records,
        summary,
    })
}

fn run_replicate(
    cfg: &ExperimentConfig,
    pipeline: &PipelineConfig,
    structure: &CaseStructure,
    phi1: &[f64],
    r: usize,
) -> Vec<ReplicateRecord> {
    let seed = cfg.replicate_seed(r);
    let sim = cfg.sim_case(seed);
    let (ds, truth) = generate_with(&sim, structure.clone());
    let grid = sim.grid();
    let mut pipeline = pipeline.clone();
    pipeline.scores.seed = mix(seed, SCORE_STREAM);
    cfg.methods
        .iter()
        .map(|&method| {
            let outcome = run_method(method, &ds, &grid, &pipeline).and_then(|fit| {
                let mut metrics = BTreeMap::new();
                let s = surface_metrics(&fit.mean_variance, &fit.model, structure, phi1);
                metrics.insert("mean_sse".to_string(), s.mean_sse);
                metrics.insert("cov_sse".to_string(), s.cov_sse);
                metrics.insert("noise_sse".to_string(), s.noise_sse);
                metrics.insert("snr_sse".to_string(), s.snr_sse);
                metrics.insert("phi1_alignment".to_string(), s.phi1_alignment);
                metrics.insert("k".to_string(), fit.k as f64);
                match cfg.scenario {
                    Scenario::Surfaces => {}
                    Scenario::GflmIdentity => gflm_metrics(
                        cfg,
                        &fit,
                        &truth.response_identity,
                        seed,
                        Link::Identity,
                        structure,
                        &mut metrics,
                    )?,
                    Scenario::GflmLogit => gflm_metrics(
                        cfg,
                        &fit,
                        &truth.response_binary,
                        seed,
                        Link::Logit,
                        structure,
                        &mut metrics,
                    )?,
                }
                Ok(metrics)
            });
            match outcome {
                Ok(metrics) => ReplicateRecord {
                    replicate: r,
                    seed,
                    method,
                    metrics,
                    error: None,
                },
                Err(e) => {
                    warn!("case {} replicate {r} {method}: {e}", cfg.case_id);
                    ReplicateRecord {
                        replicate: r,
                        seed,
                        method,
                        metrics: BTreeMap::new(),
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

/// Fits the model on the training scores, then scores a fresh test set of
/// the same size with the training surfaces.
fn gflm_metrics(
    cfg: &ExperimentConfig,
    fit: &MethodFit,
    y: &[f64],
    seed: u64,
    link: Link,
    structure: &CaseStructure,
    out: &mut BTreeMap<String, f64>,
) -> Result<()> {
    let scores = fit
        .scores
        .as_ref()
        .ok_or_else(|| Error::Config("scores were not computed".into()))?;
    let model = fit_gflm(scores, None, y, link, fit.k)?;
    let fitted = predict_gflm(&model, &scores.scores, None)?;

    let test_seed = mix(seed, TEST_SET_STREAM);
    let (test_ds, test_truth) = generate_with(&cfg.sim_case(test_seed), structure.clone());
    let score_cfg = ScoreConfig {
        seed: mix(test_seed, SCORE_STREAM),
        ..cfg.pipeline.scores
    };
    let test_scores = predict_with(fit, &test_ds, &score_cfg)?;
    let predicted = predict_gflm(&model, &test_scores.scores, None)?;
    match link {
        Link::Identity => {
            out.insert("mse_insample".into(), mse(&fitted, y));
            out.insert("mse_heldout".into(), mse(&predicted, &test_truth.response_identity));
        }
        Link::Logit => {
            out.insert("accuracy_insample".into(), accuracy(&fitted, y));
            out.insert(
                "accuracy_heldout".into(),
                accuracy(&predicted, &test_truth.response_binary),
            );
            out.insert("separation".into(), f64::from(u8::from(model.fit_info.separation)));
        }
    }
    Ok(())
}

fn summarize(cfg: &ExperimentConfig, records: &[ReplicateRecord]) -> Vec<MetricSummary> {
    let mut out = Vec::new();
    for &method in &cfg.methods {
        let mine: Vec<&ReplicateRecord> = records.iter().filter(|r| r.method == method).collect();
        let failures = mine.iter().filter(|r| r.error.is_some()).count();
        let mut names: Vec<&String> = mine.iter().flat_map(|r| r.metrics.keys()).collect();
        names.sort();
        names.dedup();
        for name in names {
            let v: Vec<f64> = mine.iter().filter_map(|r| r.metrics.get(name).copied()).collect();
            let (mean, se) = mean_and_se(&v);
            out.push(MetricSummary {
                case_id: cfg.case_id,
                scenario: cfg.scenario,
                method,
                metric: name.clone(),
                mean,
                std_error: se,
                replicates: v.len(),
                failures,
            });
        }
    }
    out
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One row per case × scenario × method × metric.
pub fn write_summary_csv<W: Write>(summaries: &[MetricSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::domain(format!("writing summary csv: {e}"));
    w.write_record([
        "case",
        "scenario",
        "method",
        "metric",
        "mean",
        "std_error",
        "replicates",
        "failures",
    ])
    .map_err(csv_err)?;
    for s in summaries {
        w.write_record([
            s.case_id.to_string(),
            s.scenario.to_string(),
            s.method.to_string(),
            s.metric.clone(),
            s.mean.to_string(),
            s.std_error.to_string(),
            s.replicates.to_string(),
            s.failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::domain(format!("writing summary csv: {e}")))
}

/// Curves on a common grid as long-form `series,t,value` CSV.
pub fn write_series_csv<W: Write>(grid: &[f64], series: &[(String, Vec<f64>)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::domain(format!("writing series csv: {e}"));
    w.write_record(["series", "t", "value"]).map_err(csv_err)?;
    for (name, values) in series {
        for (t, v) in grid.iter().zip(values) {
            w.write_record([name.clone(), t.to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::domain(format!("writing series csv: {e}")))
}

/// Leading eigenfunction of each fit, sign-matched to `reference`, plus the
/// reference itself.
pub fn phi1_overlay(fits: &[MethodFit], reference: &[f64]) -> Vec<(String, Vec<f64>)> {
    let mut out = vec![("truth".to_string(), reference.to_vec())];
    for f in fits {
        let Some(phi) = f.model.eigen.eigenvectors.first() else {
            continue;
        };
        let ip = crate::numeric::quad_inner(&f.model.eigen.quad_weights, phi, reference);
        let sign = if ip < 0.0 { -1.0 } else { 1.0 };
        out.push((f.method.to_string(), phi.iter().map(|v| sign * v).collect()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_replicates_rejected() {
        let cfg = ExperimentConfig::new(1, Scenario::Surfaces, 0, 1);
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        let a = ExperimentConfig::new(2, Scenario::Surfaces, 10, 7);
        let b = ExperimentConfig::new(3, Scenario::Surfaces, 10, 7);
        let c = ExperimentConfig::new(2, Scenario::GflmIdentity, 10, 7);
        assert_ne!(a.replicate_seed(0), a.replicate_seed(1));
        assert_ne!(a.replicate_seed(0), b.replicate_seed(0));
        assert_ne!(a.replicate_seed(0), c.replicate_seed(0));
    }

    #[test]
    fn standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }
}
