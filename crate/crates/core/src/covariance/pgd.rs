//! Elementwise projected gradient ascent over the off-diagonal entries of
//! Σ̃ with the diagonal held at the stage-1 variances, keeping the matrix PSD.

use log::{trace, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loglik::{unit_observations, MixedConditioning, TargetStats};
use crate::dataset::FunctionalDataset;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mean_variance::MeanVarianceEstimate;
use crate::numeric::{check_grid, interp, is_pd_shifted, nearest_psd, SymMatrix, PSD_TOL};

/// Shift used by the Cholesky feasibility probe: accepted matrices have
/// smallest eigenvalue above `-PD_SHIFT`.
const PD_SHIFT: f64 = 1e-11;
/// Correlations are kept inside `±(1 - RHO_MARGIN)` so the likelihood stays finite.
const RHO_MARGIN: f64 = 1e-8;

/// Order in which the step-size rules are tried after each sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// Oscillation tests first (criterion 1, or a growing sign alternation),
    /// then the mean-α rules; the ×1.1 growth is withheld while any element
    /// alternates. Without this the growth on full steps outruns the
    /// oscillation check and the sweep never settles.
    #[default]
    OscillationFirst,
    /// Mean α = 1, then mean α below threshold, then oscillation.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    /// Initial step ε⁽¹⁾; `None` uses 0.01 × mean |initial off-diagonal|.
    pub init_step: Option<f64>,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub backtrack_decrement: f64,
    pub seed: u64,
    /// Mean blend weight below which the step shrinks by `decrease_factor`.
    pub decrease_threshold: f64,
    pub increase_factor: f64,
    pub decrease_factor: f64,
    pub oscillation_factor: f64,
    pub schedule: StepSchedule,
    pub conditioning: MixedConditioning,
    /// Record the smallest eigenvalue of Σ̃ after every sweep.
    pub track_min_eigenvalue: bool,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig {
            init_step: None,
            tolerance: 1e-6,
            max_sweeps: 500,
            backtrack_decrement: 1e-4,
            seed: 0,
            decrease_threshold: 0.9,
            increase_factor: 1.1,
            decrease_factor: 0.9,
            oscillation_factor: 0.5,
            schedule: StepSchedule::OscillationFirst,
            conditioning: MixedConditioning::ExactValue,
            track_min_eigenvalue: false,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if let Some(e) = self.init_step {
            if !positive(e) {
                return Err(Error::Config(format!("init_step must be positive, got {e}")));
            }
        }
        if !positive(self.tolerance) || self.max_sweeps == 0 {
            return Err(Error::Config("tolerance and max_sweeps must be positive".into()));
        }
        if !(positive(self.backtrack_decrement) && self.backtrack_decrement < 1.0) {
            return Err(Error::Config("backtrack_decrement must lie in (0, 1)".into()));
        }
        if !(self.decrease_threshold > 0.0 && self.decrease_threshold <= 1.0) {
            return Err(Error::Config("decrease_threshold must lie in (0, 1]".into()));
        }
        if ![self.increase_factor, self.decrease_factor, self.oscillation_factor]
            .iter()
            .all(|&f| positive(f))
        {
            return Err(Error::Config("step factors must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdFit {
    pub sigma_tilde: SymMatrix,
    pub sweeps: usize,
    pub converged: bool,
    /// Largest elementwise move in the final sweep.
    pub max_change: f64,
    pub initial_step: f64,
    pub final_step: f64,
    pub min_eigenvalues: Vec<f64>,
}

/// Likelihood statistics for every upper-triangle gridpoint pair.
pub(crate) struct GridTargets {
    pub index: Vec<(usize, usize)>,
    pub stats: Vec<TargetStats>,
}

impl GridTargets {
    pub fn build(ds: &FunctionalDataset, mv: &MeanVarianceEstimate, grid: &[f64], k: &KernelSpec) -> Self {
        let g = grid.len();
        let mu: Vec<f64> = grid.iter().map(|&t| mv.mu_at(t)).collect();
        let var: Vec<f64> = grid.iter().map(|&t| mv.sigma_tilde_sq_at(t)).collect();
        let mut index = Vec::with_capacity(g * (g - 1) / 2);
        let mut pos = vec![usize::MAX; g * g];
        let mut stats = Vec::with_capacity(g * (g - 1) / 2);
        for i in 0..g {
            for j in (i + 1)..g {
                pos[i * g + j] = index.len();
                index.push((i, j));
                stats.push(TargetStats::new([mu[i], mu[j]], [var[i], var[j]]));
            }
        }
        for obs in unit_observations(ds) {
            let weights: Vec<Vec<f64>> = obs
                .iter()
                .map(|o| grid.iter().map(|&t| k.weight(t - o.0)).collect())
                .collect();
            for a in 0..obs.len() {
                for b in (a + 1)..obs.len() {
                    let x = (obs[a].1, obs[a].2);
                    let y = (obs[b].1, obs[b].2);
                    for i in 0..g {
                        let wi = weights[a][i];
                        for j in (i + 1)..g {
                            stats[pos[i * g + j]].add(wi * weights[b][j], x, y);
                        }
                    }
                }
            }
        }
        GridTargets { index, stats }
    }

    /// Derivative of the weight-normalized local log-likelihood at target `e`.
    #[inline]
    fn gradient(&self, e: usize, bounds: crate::dataset::Bounds, c: f64, cond: MixedConditioning) -> f64 {
        let st = &self.stats[e];
        if st.is_empty() {
            return 0.0;
        }
        st.evaluate(bounds, c, cond, false).1 / st.total_weight
    }
}

/// Pairwise-complete sample covariance of recorded values on the grid, with
/// observations snapped to their nearest gridpoint; unobserved pairs are 0.
pub fn pairwise_sample_covariance(ds: &FunctionalDataset, grid: &[f64]) -> SymMatrix {
    let g = grid.len();
    let rows: Vec<Vec<Option<f64>>> = ds
        .trajectories
        .iter()
        .map(|tr| {
            let mut sum = vec![0.0; g];
            let mut cnt = vec![0usize; g];
            for p in &tr.points {
                let gi = interp::nearest_index(grid, p.time);
                sum[gi] += p.value;
                cnt[gi] += 1;
            }
            (0..g).map(|i| (cnt[i] > 0).then(|| sum[i] / cnt[i] as f64)).collect()
        })
        .collect();
    SymMatrix::from_fn(g, |i, j| {
        let both: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r[i]?, r[j]?))).collect();
        if both.len() < 2 {
            return 0.0;
        }
        let n = both.len() as f64;
        let mx = both.iter().map(|p| p.0).sum::<f64>() / n;
        let my = both.iter().map(|p| p.1).sum::<f64>() / n;
        both.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / (n - 1.0)
    })
}

fn feasible(m: &nalgebra::DMatrix<f64>, i: usize, j: usize) -> bool {
    let lim = (1.0 - RHO_MARGIN) * (m[(i, i)] * m[(j, j)]).sqrt();
    m[(i, j)].abs() <= lim && is_pd_shifted(m, PD_SHIFT)
}

/// Fraction of the smallest variance kept as eigenvalue headroom in the
/// starting matrix, so the first sweeps are not pinned to the PSD boundary.
const INIT_HEADROOM: f64 = 1e-3;

/// Blends off-diagonals toward zero, `κM + (1−κ)diag(M)`, with the largest κ
/// that leaves the smallest eigenvalue at least `INIT_HEADROOM · min diag`.
fn pull_inside(m: SymMatrix) -> SymMatrix {
    let min_diag = m.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    let target = INIT_HEADROOM * min_diag;
    let lambda = m.min_eigenvalue();
    if lambda >= target {
        return m;
    }
    let kappa = ((min_diag - target) / (min_diag - lambda)).clamp(0.0, 1.0);
    SymMatrix::from_fn(m.dim(), |i, j| if i == j { m[(i, i)] } else { kappa * m[(i, j)] })
}

pub fn fit_covariance_pgd(
    ds: &FunctionalDataset,
    mv: &MeanVarianceEstimate,
    grid: &[f64],
    k: &KernelSpec,
    cfg: &PgdConfig,
) -> Result<PgdFit> {
    check_grid(grid)?;
    cfg.validate()?;
    let targets = GridTargets::build(ds, mv, grid, k);
    run_pgd(ds, mv, grid, &targets, cfg)
}

pub(crate) fn run_pgd(
    ds: &FunctionalDataset,
    mv: &MeanVarianceEstimate,
    grid: &[f64],
    targets: &GridTargets,
    cfg: &PgdConfig,
) -> Result<PgdFit> {
    let g = grid.len();
    let diag: Vec<f64> = grid.iter().map(|&t| mv.sigma_tilde_sq_at(t)).collect();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::domain("stage-1 variances must be positive"));
    }

    // Initialization: sample covariance, stage-1 diagonal, nearest PSD if needed.
    let mut init = pairwise_sample_covariance(ds, grid);
    for (i, &d) in diag.iter().enumerate() {
        init.set(i, i, d);
    }
    if !init.is_psd(PSD_TOL) {
        init = match nearest_psd(&init, true) {
            Ok(m) => m,
            Err(Error::Convergence { last, .. }) => *last,
            Err(e) => return Err(e),
        };
    }
    let init = pull_inside(init);

    let n_elem = targets.index.len();
    let mut step = match cfg.init_step {
        Some(e) => e,
        None => {
            let mean_abs = targets.index.iter().map(|&(i, j)| init[(i, j)].abs()).sum::<f64>() / n_elem.max(1) as f64;
            if mean_abs > 0.0 {
                0.01 * mean_abs
            } else {
                0.01 * diag.iter().sum::<f64>() / g as f64
            }
        }
    };
    let initial_step = step;
    let mut m = init.into_matrix();
    let mut fit = PgdFit {
        sigma_tilde: SymMatrix::zeros(0),
        sweeps: 0,
        converged: n_elem == 0,
        max_change: 0.0,
        initial_step,
        final_step: step,
        min_eigenvalues: vec![],
    };
    if n_elem == 0 {
        fit.sigma_tilde = SymMatrix::from_upper(&m)?;
        return Ok(fit);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n_elem).collect();
    // Last four sweep values of every element, oldest first, for criterion 1.
    let mut history: Vec<[f64; 4]> = targets.index.iter().map(|&(i, j)| [m[(i, j)]; 4]).collect();
    let max_k = (1.0 / cfg.backtrack_decrement).floor() as usize;

    for sweep in 1..=cfg.max_sweeps {
        order.shuffle(&mut rng);
        let mut alpha_sum = 0.0;
        let mut max_change: f64 = 0.0;
        for &e in &order {
            let (i, j) = targets.index[e];
            let prev = m[(i, j)];
            let grad = targets.gradient(e, ds.bounds, prev, cfg.conditioning);
            let target = prev + step * grad;
            let alpha = blend(&mut m, i, j, prev, target, cfg.backtrack_decrement, max_k);
            alpha_sum += alpha;
            max_change = max_change.max((m[(i, j)] - prev).abs());
        }
        for (e, &(i, j)) in targets.index.iter().enumerate() {
            let h = &mut history[e];
            *h = [h[1], h[2], h[3], m[(i, j)]];
        }
        if cfg.track_min_eigenvalue {
            fit.min_eigenvalues.push(SymMatrix::from_upper(&m)?.min_eigenvalue());
        }
        fit.sweeps = sweep;
        fit.max_change = max_change;
        if max_change < cfg.tolerance {
            fit.converged = true;
            break;
        }

        let mean_alpha = alpha_sum / n_elem as f64;
        trace!("sweep {sweep}: step {step:.3e}, mean alpha {mean_alpha:.4}, max change {max_change:.3e}");
        match cfg.schedule {
            StepSchedule::OscillationFirst => {
                // Moves far below τ are rounding noise, not oscillation.
                let floor = 1e-2 * cfg.tolerance;
                let live = |h: &[f64; 4]| sweep >= 3 && h.windows(2).any(|w| (w[1] - w[0]).abs() > floor);
                if history
                    .iter()
                    .any(|h| live(h) && (criterion_one(h) || alternation(h) == Alternation::Growing))
                {
                    step *= cfg.oscillation_factor;
                } else if mean_alpha == 1.0 && !history.iter().any(|h| live(h) && alternation(h) != Alternation::No) {
                    step *= cfg.increase_factor;
                } else if mean_alpha < cfg.decrease_threshold {
                    step *= cfg.decrease_factor;
                }
            }
            StepSchedule::Printed => {
                if mean_alpha == 1.0 {
                    step *= cfg.increase_factor;
                } else if mean_alpha < cfg.decrease_threshold {
                    step *= cfg.decrease_factor;
                } else if sweep >= 3 && history.iter().any(criterion_one) {
                    step *= cfg.oscillation_factor;
                }
            }
        }
    }
    fit.final_step = step;
    if !fit.converged {
        warn!(
            "covariance optimization stopped after {} sweeps (last max change {:e})",
            fit.sweeps, fit.max_change
        );
    }
    fit.sigma_tilde = SymMatrix::from_upper(&m)?;
    Ok(fit)
}

/// Sets `m[i,j]` to `prev + α(target − prev)` with the largest α on the
/// lattice `1, 1 − δ, 1 − 2δ, …, 0` that keeps the matrix feasible, and
/// returns α. Feasible blends form an interval containing 0, so the first
/// feasible lattice point from the top is found by bisection.
fn blend(m: &mut nalgebra::DMatrix<f64>, i: usize, j: usize, prev: f64, target: f64, dec: f64, max_k: usize) -> f64 {
    let set = |m: &mut nalgebra::DMatrix<f64>, v: f64| {
        m[(i, j)] = v;
        m[(j, i)] = v;
    };
    let at = |k: usize| {
        let alpha = if k >= max_k { 0.0 } else { 1.0 - k as f64 * dec };
        (alpha, alpha * target + (1.0 - alpha) * prev)
    };
    set(m, target);
    if target.is_finite() && feasible(m, i, j) {
        return 1.0;
    }
    // Invariant: lattice index `lo` infeasible, `hi` feasible.
    let (mut lo, mut hi) = (0usize, max_k);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        set(m, at(mid).1);
        if feasible(m, i, j) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (alpha, v) = at(hi);
    set(m, if hi >= max_k { prev } else { v });
    alpha
}

/// Oscillation test over the last three moves of one element.
fn criterion_one(h: &[f64; 4]) -> bool {
    let [r3, r2, r1, r0] = *h;
    let s_a = (r3 - r2).signum_or_zero();
    let s_b = (r0 - r1).signum_or_zero();
    let s_c = (r2 - r1).signum_or_zero();
    s_a == s_b && s_b != s_c && (r2 - r3).abs() < (r0 - r1).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Alternation {
    No,
    Damped,
    Growing,
}

/// Three consecutive moves of alternating sign: the period-2 pattern of a
/// step that is too long for the local curvature.
fn alternation(h: &[f64; 4]) -> Alternation {
    let [r3, r2, r1, r0] = *h;
    let (d1, d2, d3) = (r2 - r3, r1 - r2, r0 - r1);
    let s1 = d1.signum_or_zero();
    if s1 == 0.0 || d2.signum_or_zero() != -s1 || d3.signum_or_zero() != s1 {
        Alternation::No
    } else if d3.abs() >= d1.abs() {
        Alternation::Growing
    } else {
        Alternation::Damped
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}
