//! Stage 1: local kernel-weighted truncated-Gaussian likelihood for the mean
//! and total variance at each gridpoint, with leave-one-curve-out bandwidth
//! selection on non-truncated points.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Bounds, Flag, FunctionalDataset};
use crate::error::{Error, Result};
use crate::kernel::{default_bandwidth_candidates, KernelSpec};
use crate::numeric::{check_grid, interp, inverse_mills, log_normal_cdf, LN_SQRT_2PI};

const MIN_WEIGHT: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 200;
const MAX_WIDENINGS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVarianceEstimate {
    pub grid: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub sigma_tilde_sq_hat: Vec<f64>,
    pub bandwidth: f64,
    /// Bandwidth actually used per gridpoint (larger than `bandwidth` where widened).
    pub local_bandwidths: Vec<f64>,
}

impl MeanVarianceEstimate {
    pub fn mu_at(&self, t: f64) -> f64 {
        interp::interp_linear(&self.grid, &self.mu_hat, t)
    }

    pub fn sigma_tilde_sq_at(&self, t: f64) -> f64 {
        interp::interp_linear(&self.grid, &self.sigma_tilde_sq_hat, t)
    }
}

/// Kernel-weighted sufficient statistics of the likelihood at one target time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct LocalSums {
    below: f64,
    above: f64,
    w0: f64,
    w1: f64,
    w2: f64,
}

impl LocalSums {
    fn at(t: f64, ds: &FunctionalDataset, k: &KernelSpec) -> Self {
        let mut s = LocalSums::default();
        for tr in &ds.trajectories {
            for p in &tr.points {
                let w = k.weight(t - p.time);
                match p.flag {
                    Flag::Below => s.below += w,
                    Flag::Above => s.above += w,
                    Flag::None => {
                        s.w0 += w;
                        s.w1 += w * p.value;
                        s.w2 += w * p.value * p.value;
                    }
                }
            }
        }
        s
    }

    fn total(&self) -> f64 {
        self.below + self.above + self.w0
    }

    /// Value, gradient and Hessian in `(μ, η = log σ̃)`.
    fn evaluate(&self, bounds: Bounds, mu: f64, eta: f64) -> (f64, [f64; 2], [[f64; 3]; 1]) {
        let s = eta.exp();
        let s2 = s * s;
        let resid1 = self.w1 - mu * self.w0;
        let q = (self.w2 - 2.0 * mu * self.w1 + mu * mu * self.w0).max(0.0);
        let mut value = -self.w0 * (eta + LN_SQRT_2PI) - 0.5 * q / s2;
        let mut g = [resid1 / s2, -self.w0 + q / s2];
        let mut h = [-self.w0 / s2, -2.0 * resid1 / s2, -2.0 * q / s2];

        if self.below > 0.0 {
            let za = (bounds.a - mu) / s;
            let r = inverse_mills(za);
            let c = self.below;
            value += c * log_normal_cdf(za);
            g[0] += c * (-r / s);
            g[1] += c * (-r * za);
            h[0] += c * (-r * (za + r) / s2);
            h[1] += c * (-r * za * (za + r) / s + r / s);
            h[2] += c * (-r * za * za * (za + r) + r * za);
        }
        if self.above > 0.0 {
            let y = (mu - bounds.b) / s;
            let r = inverse_mills(y);
            let c = self.above;
            value += c * log_normal_cdf(y);
            g[0] += c * (r / s);
            g[1] += c * (-r * y);
            h[0] += c * (-r * (y + r) / s2);
            h[1] += c * (r * y * (y + r) / s - r / s);
            h[2] += c * (-r * (y + r) * y * y + r * y);
        }
        (value, g, [h])
    }

    fn identified(&self) -> bool {
        self.w0 > MIN_WEIGHT * self.total().max(1.0)
    }
}

/// Local log-likelihood at `t` and its gradient in `(μ, log σ̃)`.
pub fn local_loglik_mean_var(
    t: f64,
    mu: f64,
    log_sigma: f64,
    ds: &FunctionalDataset,
    k: &KernelSpec,
) -> Result<(f64, [f64; 2])> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("target time {t} outside [0, 1]")));
    }
    let sums = LocalSums::at(t, ds, k);
    if sums.total() <= MIN_WEIGHT {
        return Err(Error::EmptyWindow { t });
    }
    let (v, g, _) = sums.evaluate(ds.bounds, mu, log_sigma);
    Ok((v, g))
}

/// Box for `(μ, η)`.
#[derive(Debug, Clone, Copy)]
struct Limits {
    mu: (f64, f64),
    eta: (f64, f64),
}

impl Limits {
    fn new(bounds: Bounds) -> Self {
        let w = bounds.width();
        Limits {
            mu: (bounds.a - 10.0 * w, bounds.b + 10.0 * w),
            eta: (0.5 * 1e-8f64.ln(), (10.0 * w).ln()),
        }
    }

    fn project(&self, x: [f64; 2]) -> [f64; 2] {
        [x[0].clamp(self.mu.0, self.mu.1), x[1].clamp(self.eta.0, self.eta.1)]
    }

    /// Gradient with components pointing out of the box at an active bound zeroed.
    fn projected_gradient(&self, x: [f64; 2], g: [f64; 2]) -> [f64; 2] {
        let mut pg = g;
        let lims = [self.mu, self.eta];
        for i in 0..2 {
            if (x[i] <= lims[i].0 && g[i] < 0.0) || (x[i] >= lims[i].1 && g[i] > 0.0) {
                pg[i] = 0.0;
            }
        }
        pg
    }
}

fn default_init(sums: &LocalSums, bounds: Bounds) -> (f64, f64) {
    if sums.w0 > MIN_WEIGHT {
        let mu = sums.w1 / sums.w0;
        let var = (sums.w2 / sums.w0 - mu * mu).max(0.0);
        if var > 0.0 {
            return (mu, var);
        }
        return (mu, (bounds.width() / 4.0).powi(2));
    }
    (0.5 * (bounds.a + bounds.b), (bounds.width() / 4.0).powi(2))
}

/// Maximizes the local likelihood at `t`. Returns `(μ̂, σ̃̂²)`.
pub fn fit_local_mean_variance(
    t: f64,
    ds: &FunctionalDataset,
    k: &KernelSpec,
    init: Option<(f64, f64)>,
) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("target time {t} outside [0, 1]")));
    }
    let sums = LocalSums::at(t, ds, k);
    if sums.total() <= MIN_WEIGHT {
        return Err(Error::EmptyWindow { t });
    }
    if !sums.identified() {
        return Err(Error::NonIdentified { t });
    }
    let (mu, var) = maximize(&sums, ds.bounds, init.unwrap_or_else(|| default_init(&sums, ds.bounds)));
    Ok((mu, var))
}

fn maximize(sums: &LocalSums, bounds: Bounds, init: (f64, f64)) -> (f64, f64) {
    let lim = Limits::new(bounds);
    let f = |x: [f64; 2]| sums.evaluate(bounds, x[0], x[1]);
    let mut x = lim.project([init.0, 0.5 * init.1.max(1e-300).ln()]);
    let (mut fx, mut g, mut h) = f(x);

    for _ in 0..MAX_ITER {
        let pg = lim.projected_gradient(x, g);
        if pg[0].abs().max(pg[1].abs()) < GRAD_TOL {
            break;
        }
        let dir = newton_direction(&lim, x, g, h[0]);
        let mut step = 1.0;
        let slope = dir[0] * g[0] + dir[1] * g[1];
        let mut accepted = false;
        while step > 1e-12 {
            let cand = lim.project([x[0] + step * dir[0], x[1] + step * dir[1]]);
            let (fc, gc, hc) = f(cand);
            let slack = 4.0 * f64::EPSILON * fx.abs().max(1.0);
            if fc.is_finite() && fc >= fx + 1e-4 * step * slope.max(0.0) - slack {
                accepted = cand != x;
                x = cand;
                fx = fc;
                g = gc;
                h = hc;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Newton made no progress: fall back to coordinate-wise golden section.
            let before = fx;
            x = golden_sweep(&f, &lim, x);
            let (fv, gv, hv) = f(x);
            fx = fv;
            g = gv;
            h = hv;
            if fx <= before + 1e-14 * before.abs().max(1.0) {
                break;
            }
        }
    }
    (x[0], (2.0 * x[1]).exp())
}

/// Newton direction on the free coordinates, regularized until it is an ascent direction.
fn newton_direction(lim: &Limits, x: [f64; 2], g: [f64; 2], h: [f64; 3]) -> [f64; 2] {
    let pg = lim.projected_gradient(x, g);
    let free = [pg[0] != 0.0 || g[0] == 0.0, pg[1] != 0.0 || g[1] == 0.0];
    // Negate the Hessian so we solve a (hopefully) positive definite system.
    let (a, b, c) = (-h[0], -h[1], -h[2]);
    let mut shift = 0.0;
    for _ in 0..60 {
        let (aa, cc) = (a + shift, c + shift);
        let d = match free {
            [true, true] => {
                let det = aa * cc - b * b;
                if aa > 0.0 && det > 0.0 {
                    Some([(cc * pg[0] - b * pg[1]) / det, (aa * pg[1] - b * pg[0]) / det])
                } else {
                    None
                }
            }
            [true, false] => (aa > 0.0).then(|| [pg[0] / aa, 0.0]),
            [false, true] => (cc > 0.0).then(|| [0.0, pg[1] / cc]),
            [false, false] => Some([0.0, 0.0]),
        };
        if let Some(d) = d {
            if d[0].is_finite() && d[1].is_finite() {
                return d;
            }
        }
        shift = if shift == 0.0 {
            1e-8 * (a.abs() + c.abs()).max(1.0)
        } else {
            shift * 10.0
        };
    }
    pg
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_sweep<F>(f: &F, lim: &Limits, mut x: [f64; 2]) -> [f64; 2]
where
    F: Fn([f64; 2]) -> (f64, [f64; 2], [[f64; 3]; 1]),
{
    let ranges = [lim.mu, lim.eta];
    for i in 0..2 {
        let (mut lo, mut hi) = ranges[i];
        let value = |v: f64| {
            let mut y = x;
            y[i] = v;
            f(y).0
        };
        let mut c = hi - INV_PHI * (hi - lo);
        let mut d = lo + INV_PHI * (hi - lo);
        let (mut fc, mut fd) = (value(c), value(d));
        for _ in 0..200 {
            if (hi - lo).abs() < 1e-12 * (1.0 + c.abs()) {
                break;
            }
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - INV_PHI * (hi - lo);
                fc = value(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + INV_PHI * (hi - lo);
                fd = value(d);
            }
        }
        let best = 0.5 * (lo + hi);
        if value(best) >= value(x[i]) {
            x[i] = best;
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFitConfig {
    /// Solve gridpoints sequentially, starting each from its neighbour's solution.
    pub warm_start: bool,
}

impl Default for MeanFitConfig {
    fn default() -> Self {
        MeanFitConfig { warm_start: true }
    }
}

pub fn fit_mean_variance_curve(ds: &FunctionalDataset, grid: &[f64], k: &KernelSpec) -> Result<MeanVarianceEstimate> {
    fit_mean_variance_curve_with(ds, grid, k, MeanFitConfig::default())
}

pub fn fit_mean_variance_curve_with(
    ds: &FunctionalDataset,
    grid: &[f64],
    k: &KernelSpec,
    cfg: MeanFitConfig,
) -> Result<MeanVarianceEstimate> {
    check_grid(grid)?;
    let fit_point = |t: f64, init: Option<(f64, f64)>| -> std::result::Result<(f64, f64, f64), f64> {
        let mut kk = *k;
        for attempt in 0..=MAX_WIDENINGS {
            match fit_local_mean_variance(t, ds, &kk, if attempt == 0 { init } else { None }) {
                Ok((m, v)) => return Ok((m, v, kk.bandwidth)),
                Err(Error::NonIdentified { .. }) | Err(Error::EmptyWindow { .. }) if attempt < MAX_WIDENINGS => {
                    debug!("widening bandwidth at t = {t}");
                    kk = kk.widened(2.0);
                }
                Err(_) => return Err(t),
            }
        }
        Err(t)
    };

    let results: Vec<std::result::Result<(f64, f64, f64), f64>> = if cfg.warm_start {
        let mut out = Vec::with_capacity(grid.len());
        let mut prev: Option<(f64, f64)> = None;
        for &t in grid {
            let r = fit_point(t, prev);
            prev = r.as_ref().ok().map(|&(m, v, _)| (m, v));
            out.push(r);
        }
        out
    } else {
        grid.par_iter().map(|&t| fit_point(t, None)).collect()
    };

    let failed: Vec<f64> = results.iter().filter_map(|r| r.as_ref().err().copied()).collect();
    if !failed.is_empty() {
        return Err(Error::CurveFit { gridpoints: failed });
    }
    let mut est = MeanVarianceEstimate {
        grid: grid.to_vec(),
        mu_hat: Vec::with_capacity(grid.len()),
        sigma_tilde_sq_hat: Vec::with_capacity(grid.len()),
        bandwidth: k.bandwidth,
        local_bandwidths: Vec::with_capacity(grid.len()),
    };
    for (m, v, h) in results.into_iter().flatten() {
        est.mu_hat.push(m);
        est.sigma_tilde_sq_hat.push(v);
        est.local_bandwidths.push(h);
    }
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub candidates: Vec<f64>,
    pub scores: Vec<f64>,
}

/// Leave-one-curve-out CV over non-truncated points. Returns the minimizing
/// bandwidth (smallest on ties) and the full table.
pub fn select_mean_bandwidth(ds: &FunctionalDataset, candidates: &[f64], grid: &[f64]) -> Result<(f64, CvTable)> {
    if ds.n() < 2 {
        return Err(Error::domain("bandwidth CV needs at least two trajectories"));
    }
    if candidates.is_empty() {
        return Err(Error::domain("no bandwidth candidates"));
    }
    check_grid(grid)?;
    let kernels = candidates
        .iter()
        .map(|&h| KernelSpec::gaussian(h))
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = kernels.par_iter().map(|k| cv_score(ds, k, grid)).collect();

    let mut best = 0;
    for i in 1..scores.len() {
        let better = scores[i] < scores[best] || (scores[i] == scores[best] && candidates[i] < candidates[best]);
        if better {
            best = i;
        }
    }
    Ok((
        candidates[best],
        CvTable {
            candidates: candidates.to_vec(),
            scores,
        },
    ))
}

fn cv_score(ds: &FunctionalDataset, k: &KernelSpec, grid: &[f64]) -> f64 {
    let g = grid.len();
    // Per-unit kernel sums of untruncated points at each gridpoint.
    let per_unit: Vec<(Vec<f64>, Vec<f64>)> = ds
        .trajectories
        .iter()
        .map(|tr| {
            let mut s0 = vec![0.0; g];
            let mut s1 = vec![0.0; g];
            for p in tr.untruncated() {
                for (gi, &t) in grid.iter().enumerate() {
                    let w = k.weight(t - p.time);
                    s0[gi] += w;
                    s1[gi] += w * p.value;
                }
            }
            (s0, s1)
        })
        .collect();
    let mut tot0 = vec![0.0; g];
    let mut tot1 = vec![0.0; g];
    for (s0, s1) in &per_unit {
        for gi in 0..g {
            tot0[gi] += s0[gi];
            tot1[gi] += s1[gi];
        }
    }

    let mut score = 0.0;
    for (tr, (s0, s1)) in ds.trajectories.iter().zip(&per_unit) {
        if tr.untruncated().next().is_none() {
            continue;
        }
        let mut loo = Vec::with_capacity(g);
        let mut usable = true;
        for gi in 0..g {
            let w0 = tot0[gi] - s0[gi];
            if w0 <= MIN_WEIGHT {
                usable = false;
                break;
            }
            loo.push((tot1[gi] - s1[gi]) / w0);
        }
        if !usable {
            warn!(
                "CV fold for unit {} has no usable points at h = {}",
                tr.unit_id, k.bandwidth
            );
            continue;
        }
        for p in tr.untruncated() {
            let r = p.value - interp::interp_linear(grid, &loo, p.time);
            score += r * r;
        }
    }
    score
}

/// CV-selected bandwidth followed by the curve fit.
pub fn estimate_mean_variance(
    ds: &FunctionalDataset,
    grid: &[f64],
    candidates: Option<&[f64]>,
) -> Result<(MeanVarianceEstimate, CvTable)> {
    let default;
    let candidates = match candidates {
        Some(c) => c,
        None => {
            default = default_bandwidth_candidates(grid);
            &default
        }
    };
    let (h, table) = select_mean_bandwidth(ds, candidates, grid)?;
    let est = fit_mean_variance_curve(ds, grid, &KernelSpec::gaussian(h)?)?;
    Ok((est, table))
}
