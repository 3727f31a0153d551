//! Stage 3: principal component scores. The plain BLUP uses only the
//! non-truncated points; the Monte Carlo predictor imputes truncated points
//! from their conditional truncated-normal law and averages the BLUP of the
//! completed vectors.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceModel;
use crate::dataset::{Flag, FunctionalDataset, Trajectory};
use crate::error::{Error, Result};
use crate::mean_variance::MeanVarianceEstimate;
use crate::numeric::{
    conditional_gaussian, interp, sample_truncated_mvn, GaussianPartition, GibbsConfig, SymMatrix,
    DEFAULT_CONDITION_CAP,
};

pub const DEFAULT_MC_SAMPLES: usize = 100;
const RIDGE: f64 = 1e-8;
const RIDGE_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub m: usize,
    pub seed: u64,
    pub gibbs: GibbsConfig,
    /// Keep the per-draw scores (needed for averaging a nonlinear link over draws).
    pub keep_draws: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            m: DEFAULT_MC_SAMPLES,
            seed: 0,
            gibbs: GibbsConfig::default(),
            keep_draws: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitFlags {
    /// Every point of the unit is truncated; the plain BLUP row is zero.
    pub no_untruncated: bool,
    /// Sampling was impossible; the Monte Carlo row repeats the plain BLUP.
    pub mc_fallback: bool,
    /// The covariance block was ridge-stabilized.
    pub ridged: bool,
}

impl UnitFlags {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.no_untruncated {
            parts.push("no_untruncated");
        }
        if self.mc_fallback {
            parts.push("mc_fallback");
        }
        if self.ridged {
            parts.push("ridged");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("|")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub unit_ids: Vec<String>,
    /// Monte Carlo conditional-expectation scores, one row per unit.
    pub scores: Vec<Vec<f64>>,
    /// BLUP from non-truncated points only.
    pub scores_nontrunc: Vec<Vec<f64>>,
    pub flags: Vec<UnitFlags>,
    /// Per-draw score rows (`m × K` per unit) when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<Vec<Vec<f64>>>>,
    pub m: usize,
    pub seed: u64,
    pub k: usize,
}

impl ScoreSet {
    pub fn n(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn index_of(&self, unit_id: &str) -> Result<usize> {
        self.unit_ids
            .iter()
            .position(|u| u == unit_id)
            .ok_or_else(|| Error::Lookup(unit_id.to_string()))
    }

    /// Long CSV: `unit_id,k,score_mc,score_nontrunc,flags` with `k` from 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::domain(format!("writing scores csv: {e}"));
        w.write_record(["unit_id", "k", "score_mc", "score_nontrunc", "flags"])
            .map_err(csv_err)?;
        for (i, id) in self.unit_ids.iter().enumerate() {
            let label = self.flags[i].label();
            for k in 0..self.k {
                w.write_record([
                    id.as_str(),
                    &(k + 1).to_string(),
                    &self.scores[i][k].to_string(),
                    &self.scores_nontrunc[i][k].to_string(),
                    &label,
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::domain(format!("writing scores csv: {e}")))
    }
}

impl ScoreSet {
    /// Reads the long CSV written by [`ScoreSet::write_csv`]. Units keep
    /// their first-appearance order; `m` and `seed` are not stored and read as 0.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<ScoreSet> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let parse = |line: usize, message: String| Error::Parse { line, message };
        let headers = rdr.headers().map_err(|e| parse(1, e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse(1, format!("missing column `{name}`")))
        };
        let (c_unit, c_k, c_mc, c_plain) = (col("unit_id")?, col("k")?, col("score_mc")?, col("score_nontrunc")?);
        let c_flags = headers.iter().position(|h| h == "flags");
        let mut out = ScoreSet {
            unit_ids: Vec::new(),
            scores: Vec::new(),
            scores_nontrunc: Vec::new(),
            flags: Vec::new(),
            draws: None,
            m: 0,
            seed: 0,
            k: 0,
        };
        let mut index = std::collections::HashMap::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| parse(line, e.to_string()))?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let num = |c: usize| -> Result<f64> {
                field(c)
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse(line, format!("not a finite number: {:?}", field(c))))
            };
            let k: usize = field(c_k)
                .parse()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| parse(line, format!("bad component index {:?}", field(c_k))))?;
            let unit = field(c_unit).to_string();
            let i = *index.entry(unit.clone()).or_insert_with(|| {
                out.unit_ids.push(unit);
                out.scores.push(Vec::new());
                out.scores_nontrunc.push(Vec::new());
                out.flags.push(UnitFlags::default());
                out.unit_ids.len() - 1
            });
            if out.scores[i].len() != k - 1 {
                return Err(parse(line, "components must appear in order 1, 2, ... per unit".into()));
            }
            out.scores[i].push(num(c_mc)?);
            out.scores_nontrunc[i].push(num(c_plain)?);
            if let Some(c) = c_flags {
                let label = field(c);
                out.flags[i] = UnitFlags {
                    no_untruncated: label.contains("no_untruncated"),
                    mc_fallback: label.contains("mc_fallback"),
                    ridged: label.contains("ridged"),
                };
            }
        }
        let k = out.scores.first().map_or(0, Vec::len);
        if out.scores.iter().any(|r| r.len() != k) {
            return Err(parse(1, "units have different numbers of components".into()));
        }
        out.k = k;
        Ok(out)
    }
}

/// Estimated quantities interpolated to one unit's observation times.
struct UnitModel {
    mu: DVector<f64>,
    cov: SymMatrix,
    /// Row k: `λ̂_k φ̂_k(t_i)ᵀ`.
    loadings: DMatrix<f64>,
    ridged: bool,
}

fn unit_model(traj: &Trajectory, model: &CovarianceModel, mv: &MeanVarianceEstimate, k: usize) -> UnitModel {
    let times = traj.times();
    let p = times.len();
    let grid = &model.grid;
    let mu = DVector::from_iterator(p, times.iter().map(|&t| mv.mu_at(t)));
    let raw = SymMatrix::from_fn(p, |a, b| {
        interp::interp_bilinear(grid, |i, j| model.sigma_tilde[(i, j)], times[a], times[b])
    });
    let (cov, ridged) = stabilize(raw);
    let loadings = DMatrix::from_fn(k, p, |c, a| {
        model.eigen.eigenvalues[c] * interp::interp_linear(grid, &model.eigen.eigenvectors[c], times[a])
    });
    UnitModel {
        mu,
        cov,
        loadings,
        ridged,
    }
}

fn stabilize(m: SymMatrix) -> (SymMatrix, bool) {
    if m.dim() == 0 {
        return (m, false);
    }
    let eig = m.eigen();
    let (min, max) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if min > 0.0 && max / min <= RIDGE_CONDITION {
        return (m, false);
    }
    let mut a = m.into_matrix();
    for i in 0..a.nrows() {
        a[(i, i)] += RIDGE;
    }
    (SymMatrix::symmetrize(&a), true)
}

/// `Σ⁺` through the eigendecomposition; directions with eigenvalue at or
/// below `1e-12·max` are dropped.
fn pseudo_inverse(cov: &SymMatrix) -> DMatrix<f64> {
    let eig = cov.eigen();
    let max = eig.eigenvalues.max().max(0.0);
    let inv = DVector::from_fn(eig.eigenvalues.len(), |i, _| {
        let l = eig.eigenvalues[i];
        if l > 1e-12 * max {
            1.0 / l
        } else {
            0.0
        }
    });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// The linear map `r ↦ λ̂_k φ̂_k(t)ᵀ Σ̃̂(t,t)⁻¹ r` on the points `idx` (K × |idx|).
fn blup_operator(um: &UnitModel, idx: &[usize]) -> DMatrix<f64> {
    let k = um.loadings.nrows();
    if idx.is_empty() {
        return DMatrix::zeros(k, 0);
    }
    let loadings = um.loadings.select_columns(idx);
    loadings * pseudo_inverse(&um.cov.submatrix(idx))
}

fn apply(op: &DMatrix<f64>, um: &UnitModel, values: &DVector<f64>, idx: &[usize]) -> Vec<f64> {
    let r = DVector::from_iterator(idx.len(), idx.iter().map(|&a| values[a] - um.mu[a]));
    (op * r).iter().copied().collect()
}

fn blup(um: &UnitModel, values: &DVector<f64>, idx: &[usize]) -> Vec<f64> {
    apply(&blup_operator(um, idx), um, values, idx)
}

fn check_k(model: &CovarianceModel, k: usize) -> Result<()> {
    let positive = model.eigen.positive_count();
    if k > positive {
        return Err(Error::domain(format!(
            "K = {k} exceeds the {positive} positive eigenvalues"
        )));
    }
    Ok(())
}

/// Plain BLUP from non-truncated points only. The Monte Carlo columns of
/// the returned set repeat it.
pub fn blup_scores_nontruncated(
    ds: &FunctionalDataset,
    model: &CovarianceModel,
    mv: &MeanVarianceEstimate,
    k: usize,
) -> Result<ScoreSet> {
    check_k(model, k)?;
    let rows: Vec<(Vec<f64>, UnitFlags)> = ds
        .trajectories
        .par_iter()
        .map(|traj| {
            let um = unit_model(traj, model, mv, k);
            let values = DVector::from_vec(traj.values());
            let observed = untruncated_indices(traj);
            let flags = UnitFlags {
                no_untruncated: observed.is_empty(),
                mc_fallback: false,
                ridged: um.ridged,
            };
            (blup(&um, &values, &observed), flags)
        })
        .collect();
    let (scores, flags): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(ScoreSet {
        unit_ids: unit_ids(ds),
        scores: scores.clone(),
        scores_nontrunc: scores,
        flags,
        draws: None,
        m: 0,
        seed: 0,
        k,
    })
}

/// Monte Carlo conditional-expectation scores.
pub fn predict_scores_mc(
    ds: &FunctionalDataset,
    model: &CovarianceModel,
    mv: &MeanVarianceEstimate,
    k: usize,
    cfg: &ScoreConfig,
) -> Result<ScoreSet> {
    check_k(model, k)?;
    if cfg.m == 0 {
        return Err(Error::Config("Monte Carlo sample count must be at least 1".into()));
    }
    let rows: Vec<UnitScores> = ds
        .trajectories
        .par_iter()
        .enumerate()
        .map(|(i, traj)| unit_scores(traj, model, mv, k, cfg, unit_seed(cfg.seed, i as u64)))
        .collect();
    let mut out = ScoreSet {
        unit_ids: unit_ids(ds),
        scores: Vec::with_capacity(rows.len()),
        scores_nontrunc: Vec::with_capacity(rows.len()),
        flags: Vec::with_capacity(rows.len()),
        draws: cfg.keep_draws.then(Vec::new),
        m: cfg.m,
        seed: cfg.seed,
        k,
    };
    for r in rows {
        out.scores.push(r.mc);
        out.scores_nontrunc.push(r.plain);
        out.flags.push(r.flags);
        if let Some(d) = out.draws.as_mut() {
            d.push(r.draws);
        }
    }
    Ok(out)
}

struct UnitScores {
    mc: Vec<f64>,
    plain: Vec<f64>,
    flags: UnitFlags,
    draws: Vec<Vec<f64>>,
}

fn unit_scores(
    traj: &Trajectory,
    model: &CovarianceModel,
    mv: &MeanVarianceEstimate,
    k: usize,
    cfg: &ScoreConfig,
    seed: u64,
) -> UnitScores {
    let um = unit_model(traj, model, mv, k);
    let values = DVector::from_vec(traj.values());
    let observed = untruncated_indices(traj);
    let truncated: Vec<usize> = (0..traj.len()).filter(|a| !observed.contains(a)).collect();
    let plain = blup(&um, &values, &observed);
    let mut flags = UnitFlags {
        no_untruncated: observed.is_empty(),
        mc_fallback: false,
        ridged: um.ridged,
    };
    if truncated.is_empty() {
        let draws = if cfg.keep_draws {
            vec![plain.clone(); cfg.m]
        } else {
            vec![]
        };
        return UnitScores {
            mc: plain.clone(),
            plain,
            flags,
            draws,
        };
    }
    match impute(traj, &um, &values, &observed, &truncated, cfg, seed) {
        Ok(samples) => {
            // The BLUP is linear, so averaging per-draw scores equals the
            // score of the averaged completed vector.
            let all: Vec<usize> = (0..traj.len()).collect();
            let op = blup_operator(&um, &all);
            let mut completed = values.clone();
            let mut mean = DVector::zeros(traj.len());
            let mut draws = Vec::new();
            for s in 0..samples.nrows() {
                for (c, &a) in truncated.iter().enumerate() {
                    completed[a] = samples[(s, c)];
                }
                if cfg.keep_draws {
                    draws.push(apply(&op, &um, &completed, &all));
                }
                mean += &completed;
            }
            mean /= samples.nrows() as f64;
            UnitScores {
                mc: apply(&op, &um, &mean, &all),
                plain,
                flags,
                draws,
            }
        }
        Err(e) => {
            log::debug!("unit {}: falling back to plain BLUP ({e})", traj.unit_id);
            flags.mc_fallback = true;
            let draws = if cfg.keep_draws {
                vec![plain.clone(); cfg.m]
            } else {
                vec![]
            };
            UnitScores {
                mc: plain.clone(),
                plain,
                flags,
                draws,
            }
        }
    }
}

/// Draws the truncated block given the observed block, with non-truncated
/// indices ordered first.
fn impute(
    traj: &Trajectory,
    um: &UnitModel,
    values: &DVector<f64>,
    observed: &[usize],
    truncated: &[usize],
    cfg: &ScoreConfig,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let part = GaussianPartition::split(&um.mu, &um.cov, truncated, observed)?;
    let x2 = DVector::from_iterator(observed.len(), observed.iter().map(|&a| values[a]));
    let (mean, cov) = conditional_gaussian(&part, &x2, DEFAULT_CONDITION_CAP)?;
    let bounds = &traj.points;
    let mut lower = Vec::with_capacity(truncated.len());
    let mut upper = Vec::with_capacity(truncated.len());
    for &a in truncated {
        let (lo, hi) = match bounds[a].flag {
            Flag::Above => (bounds[a].value, f64::INFINITY),
            Flag::Below => (f64::NEG_INFINITY, bounds[a].value),
            Flag::None => unreachable!("observed index in truncated block"),
        };
        lower.push(lo);
        upper.push(hi);
    }
    sample_truncated_mvn(&mean, &cov, &lower, &upper, cfg.m, seed, cfg.gibbs)
}

fn untruncated_indices(traj: &Trajectory) -> Vec<usize> {
    (0..traj.len()).filter(|&a| traj.points[a].flag == Flag::None).collect()
}

fn unit_ids(ds: &FunctionalDataset) -> Vec<String> {
    ds.trajectories.iter().map(|t| t.unit_id.clone()).collect()
}

/// SplitMix64 of the run seed and unit index.
pub(crate) fn unit_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `μ̂(t) + Σ_{k<K} ξ̂_k φ̂_k(t)` on `eval_grid`.
pub fn reconstruct_trajectory(
    unit_id: &str,
    model: &CovarianceModel,
    mv: &MeanVarianceEstimate,
    scores: &ScoreSet,
    k: usize,
    eval_grid: &[f64],
) -> Result<Vec<f64>> {
    if k > scores.k {
        return Err(Error::domain(format!(
            "K = {k} exceeds the {} available scores",
            scores.k
        )));
    }
    let i = scores.index_of(unit_id)?;
    let grid = &model.grid;
    Ok(eval_grid
        .iter()
        .map(|&t| {
            mv.mu_at(t)
                + (0..k)
                    .map(|c| scores.scores[i][c] * interp::interp_linear(grid, &model.eigen.eigenvectors[c], t))
                    .sum::<f64>()
        })
        .collect())
}
