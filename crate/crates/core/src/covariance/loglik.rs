//! Bivariate truncated-Gaussian local log-likelihood for one off-diagonal
//! covariance element.
//!
//! The kernel-weighted sum over observation pairs is collapsed, per target
//! `(s, t)`, into sufficient statistics: moment sums for fully observed pairs,
//! weight totals for doubly truncated pairs, and a per-pair list for mixed
//! pairs (whose conditional probability depends on the observed value).

use serde::{Deserialize, Serialize};

use crate::dataset::{Bounds, Flag, FunctionalDataset};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mean_variance::MeanVarianceEstimate;
use crate::numeric::{
    bivariate_normal_pdf, bvn_lower, floored_ln, inverse_mills, ln_bivariate_normal_pdf, ln_bvn_lower, log_normal_cdf,
    phi_cdf, LN_SQRT_2PI,
};

const MIN_WEIGHT: f64 = 1e-12;

/// How a truncated coordinate is conditioned on its observed partner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedConditioning {
    /// `Pr{side | W = w}` at the recorded value `w`, times the density of `w`.
    #[default]
    ExactValue,
    /// `Pr{side | W ∈ (a, b)}` times the density of `w`.
    Interval,
}

/// Mixed pair groups: which coordinate is truncated and on which side.
const X_BELOW: usize = 0;
const X_ABOVE: usize = 1;
const Y_BELOW: usize = 2;
const Y_ABOVE: usize = 3;

/// Likelihood ingredients at one target `(s, t)` with `s < t`.
#[derive(Debug, Clone, Default)]
pub(crate) struct TargetStats {
    mu: [f64; 2],
    var: [f64; 2],
    sd: [f64; 2],
    pub total_weight: f64,
    w00: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
    w_aa: f64,
    w_bb: f64,
    w_ab: f64,
    w_ba: f64,
    /// `Σ w · log p(observed coordinate)` over mixed pairs.
    density_const: f64,
    /// `(weight, observed − μ_observed)` per mixed pair.
    mixed: [Vec<(f64, f64)>; 4],
    mixed_weight: [f64; 4],
}

impl TargetStats {
    pub fn new(mu: [f64; 2], var: [f64; 2]) -> Self {
        TargetStats {
            mu,
            var,
            sd: [var[0].sqrt(), var[1].sqrt()],
            ..Default::default()
        }
    }

    /// Adds one pair: `x` observed near `s`, `y` near `t`, with kernel weight `w`.
    pub fn add(&mut self, w: f64, x: (f64, Flag), y: (f64, Flag)) {
        if !(w > 0.0) {
            return;
        }
        self.total_weight += w;
        match (x.1, y.1) {
            (Flag::None, Flag::None) => {
                let dx = x.0 - self.mu[0];
                let dy = y.0 - self.mu[1];
                self.w00 += w;
                self.sxx += w * dx * dx;
                self.syy += w * dy * dy;
                self.sxy += w * dx * dy;
            }
            (Flag::Below, Flag::Below) => self.w_aa += w,
            (Flag::Above, Flag::Above) => self.w_bb += w,
            (Flag::Below, Flag::Above) => self.w_ab += w,
            (Flag::Above, Flag::Below) => self.w_ba += w,
            (side, Flag::None) => self.push_mixed(if side == Flag::Below { X_BELOW } else { X_ABOVE }, w, y.0, 1),
            (Flag::None, side) => self.push_mixed(if side == Flag::Below { Y_BELOW } else { Y_ABOVE }, w, x.0, 0),
        }
    }

    fn push_mixed(&mut self, group: usize, w: f64, observed: f64, obs_coord: usize) {
        let d = observed - self.mu[obs_coord];
        let z = d / self.sd[obs_coord];
        self.density_const += w * (-LN_SQRT_2PI - self.sd[obs_coord].ln() - 0.5 * z * z);
        self.mixed[group].push((w, d));
        self.mixed_weight[group] += w;
    }

    pub fn is_empty(&self) -> bool {
        self.total_weight <= MIN_WEIGHT
    }

    pub fn max_abs_cov(&self) -> f64 {
        self.sd[0] * self.sd[1]
    }

    /// Log-likelihood (if `want_value`) and its derivative in `c = σ(s, t)`.
    pub fn evaluate(&self, bounds: Bounds, c: f64, cond: MixedConditioning, want_value: bool) -> (f64, f64) {
        let [vs, vt] = self.var;
        let [ss, st] = self.sd;
        let rho = c / (ss * st);
        let drho = 1.0 / (ss * st);
        let mut value = 0.0;
        let mut grad = 0.0;

        if self.w00 > 0.0 {
            let det = vs * vt - c * c;
            let quad = vt * self.sxx - 2.0 * c * self.sxy + vs * self.syy;
            if want_value {
                value += -self.w00 * (2.0 * LN_SQRT_2PI + 0.5 * det.ln()) - 0.5 * quad / det;
            }
            grad += self.w00 * c / det + self.sxy / det - c * quad / (det * det);
        }

        let ha = (bounds.a - self.mu[0]) / ss;
        let hb = (bounds.b - self.mu[0]) / ss;
        let ka = (bounds.a - self.mu[1]) / st;
        let kb = (bounds.b - self.mu[1]) / st;
        let mut rect = |w: f64, h: f64, k: f64, r: f64, sign: f64| {
            if w > 0.0 {
                let ln_p = ln_bvn_lower(h, k, r);
                if want_value {
                    value += w * ln_p;
                }
                grad += w * sign * (ln_bivariate_normal_pdf(h, k, r) - ln_p).exp() * drho;
            }
        };
        rect(self.w_aa, ha, ka, rho, 1.0);
        rect(self.w_bb, -hb, -kb, rho, 1.0);
        rect(self.w_ab, ha, -kb, -rho, -1.0);
        rect(self.w_ba, -hb, ka, -rho, -1.0);

        if want_value {
            value += self.density_const;
        }
        match cond {
            MixedConditioning::ExactValue => {
                let (v, g) = self.mixed_exact(bounds, c, want_value);
                value += v;
                grad += g;
            }
            MixedConditioning::Interval => {
                let (v, g) = self.mixed_interval([ha, hb], [ka, kb], rho, drho, want_value);
                value += v;
                grad += g;
            }
        }
        (value, grad)
    }

    fn mixed_exact(&self, bounds: Bounds, c: f64, want_value: bool) -> (f64, f64) {
        let mut value = 0.0;
        let mut grad = 0.0;
        for group in 0..4 {
            let terms = &self.mixed[group];
            if terms.is_empty() {
                continue;
            }
            let (tr, ob) = if group < 2 { (0, 1) } else { (1, 0) };
            let below = group == X_BELOW || group == Y_BELOW;
            let bound = if below { bounds.a } else { bounds.b };
            let v_obs = self.var[ob];
            let v_cond = (self.var[tr] - c * c / v_obs).max(1e-300);
            let sq = v_cond.sqrt();
            let gain = c / v_obs;
            let inv_obs_sq = 1.0 / (v_obs * sq);
            let curv = c / (v_obs * v_cond);
            for &(w, d) in terms {
                let m = self.mu[tr] + gain * d;
                let u = (bound - m) / sq;
                let du = -d * inv_obs_sq + u * curv;
                if below {
                    if want_value {
                        value += w * log_normal_cdf(u);
                    }
                    grad += w * inverse_mills(u) * du;
                } else {
                    if want_value {
                        value += w * log_normal_cdf(-u);
                    }
                    grad -= w * inverse_mills(-u) * du;
                }
            }
        }
        (value, grad)
    }

    fn mixed_interval(&self, h: [f64; 2], k: [f64; 2], rho: f64, drho: f64, want_value: bool) -> (f64, f64) {
        let mut value = 0.0;
        let mut grad = 0.0;
        for group in 0..4 {
            let w = self.mixed_weight[group];
            if w <= 0.0 {
                continue;
            }
            // Truncated coordinate's standardized bound, observed coordinate's band.
            let (bound, band) = match group {
                X_BELOW => (h[0], k),
                X_ABOVE => (h[1], k),
                Y_BELOW => (k[0], h),
                _ => (k[1], h),
            };
            let below = group == X_BELOW || group == Y_BELOW;
            let den = phi_cdf(band[1]) - phi_cdf(band[0]);
            let strip = bvn_lower(bound, band[1], rho) - bvn_lower(bound, band[0], rho);
            let dstrip = bivariate_normal_pdf(bound, band[1], rho) - bivariate_normal_pdf(bound, band[0], rho);
            let (num, dnum) = if below { (strip, dstrip) } else { (den - strip, -dstrip) };
            if want_value {
                value += w * (floored_ln(num) - floored_ln(den));
            }
            grad += w * dnum * drho / num.max(crate::numeric::LOG_PROB_FLOOR);
        }
        (value, grad)
    }
}

/// One unit's observations, as needed by the pair sums.
pub(crate) type UnitObs = Vec<(f64, f64, Flag)>;

pub(crate) fn unit_observations(ds: &FunctionalDataset) -> Vec<UnitObs> {
    ds.trajectories
        .iter()
        .map(|tr| tr.points.iter().map(|p| (p.time, p.value, p.flag)).collect())
        .collect()
}

/// Builds the statistics at an arbitrary target by direct kernel evaluation.
pub(crate) fn target_stats(
    s: f64,
    t: f64,
    mu: [f64; 2],
    var: [f64; 2],
    units: &[UnitObs],
    k: &KernelSpec,
) -> TargetStats {
    let mut stats = TargetStats::new(mu, var);
    for obs in units {
        for j in 0..obs.len() {
            let wj = k.weight(s - obs[j].0);
            if wj == 0.0 {
                continue;
            }
            for jp in (j + 1)..obs.len() {
                let w = wj * k.weight(t - obs[jp].0);
                stats.add(w, (obs[j].1, obs[j].2), (obs[jp].1, obs[jp].2));
            }
        }
    }
    stats
}

/// Kernel-weighted local log-likelihood of `σ(s, t)` and its derivative.
///
/// The element is symmetric, so `s > t` is evaluated as `(t, s)`. Means and
/// variances come from the stage-1 estimate, interpolated off the grid.
pub fn offdiag_local_loglik(
    s: f64,
    t: f64,
    sigma_st: f64,
    mv: &MeanVarianceEstimate,
    ds: &FunctionalDataset,
    k: &KernelSpec,
    cond: MixedConditioning,
) -> Result<(f64, f64)> {
    if s == t {
        return Err(Error::domain("off-diagonal likelihood needs s != t"));
    }
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("target ({s}, {t}) outside [0, 1]²")));
    }
    let (s, t) = if s < t { (s, t) } else { (t, s) };
    let mu = [mv.mu_at(s), mv.mu_at(t)];
    let var = [mv.sigma_tilde_sq_at(s), mv.sigma_tilde_sq_at(t)];
    let stats = target_stats(s, t, mu, var, &unit_observations(ds), k);
    if stats.is_empty() {
        return Err(Error::EmptyWindow { t: s });
    }
    if !(sigma_st * sigma_st < var[0] * var[1]) {
        return Err(Error::domain(format!(
            "σ(s,t) = {sigma_st} outside the open correlation range ±{}",
            stats.max_abs_cov()
        )));
    }
    Ok(stats.evaluate(ds.bounds, sigma_st, cond, true))
}
