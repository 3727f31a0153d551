//! Generalized functional linear model on predicted scores plus baseline
//! covariates, with FVE-based choice of the number of components.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Covariates;
use crate::error::{Error, Result};
use crate::numeric::EigenSystem;
use crate::scores::ScoreSet;

pub const DEFAULT_FVE_THRESHOLD: f64 = 0.95;
const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
const SEPARATION_ETA: f64 = 30.0;
const MAX_HALVINGS: usize = 40;
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Logit,
}

impl std::str::FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "gaussian" => Ok(Link::Identity),
            "logit" | "binomial" => Ok(Link::Logit),
            _ => Err(Error::Config(format!("unknown link {s:?}"))),
        }
    }
}

/// Smallest K whose cumulative share of variance reaches `threshold`.
pub fn select_k_fve(eigen: &EigenSystem, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!(
            "FVE threshold must be in (0, 1], got {threshold}"
        )));
    }
    let positive: Vec<f64> = eigen.eigenvalues.iter().copied().filter(|&l| l > 0.0).collect();
    let total: f64 = positive.iter().sum();
    if positive.is_empty() || total <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let mut acc = 0.0;
    for (k, l) in positive.iter().enumerate() {
        acc += l;
        // Relative slack so that exact ratios like 6/8 = 0.75 are not lost to rounding.
        if acc / total >= threshold - 1e-12 {
            return Ok(k + 1);
        }
    }
    Ok(positive.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Linear predictor diverging while the likelihood still increases.
    pub separation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GflmFit {
    pub link: Link,
    pub k: usize,
    /// α̂₀*, which absorbs `∫μβ`.
    pub intercept: f64,
    pub covariate_coeffs: Vec<f64>,
    pub score_coeffs: Vec<f64>,
    /// In design order: intercept, covariates, scores.
    pub standard_errors: Vec<f64>,
    pub column_names: Vec<String>,
    /// Residual variance for the identity link (unbiased); 1 for logit.
    pub dispersion: f64,
    pub fit_info: FitInfo,
}

impl GflmFit {
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = vec![self.intercept];
        c.extend(&self.covariate_coeffs);
        c.extend(&self.score_coeffs);
        c
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::domain(format!("serializing fit: {e}")))
    }
}

struct Design {
    x: DMatrix<f64>,
    names: Vec<String>,
    p: usize,
}

fn design(score_rows: &[Vec<f64>], covariates: Option<&Covariates>, k: usize) -> Result<Design> {
    let n = score_rows.len();
    let p = covariates.map_or(0, |c| c.names.len());
    if let Some(c) = covariates {
        if c.rows.len() != n {
            return Err(Error::domain(format!("{} covariate rows for {n} units", c.rows.len())));
        }
        if c.rows.iter().any(|r| r.len() != p) {
            return Err(Error::domain("covariate rows have inconsistent length"));
        }
    }
    if score_rows.iter().any(|r| r.len() < k) {
        return Err(Error::domain(format!("score rows shorter than K = {k}")));
    }
    let cols = 1 + p + k;
    let x = DMatrix::from_fn(n, cols, |i, j| {
        if j == 0 {
            1.0
        } else if j <= p {
            covariates.expect("p > 0").rows[i][j - 1]
        } else {
            score_rows[i][j - 1 - p]
        }
    });
    let mut names = vec!["intercept".to_string()];
    if let Some(c) = covariates {
        names.extend(c.names.iter().cloned());
    }
    names.extend((1..=k).map(|j| format!("score{j}")));
    Ok(Design { x, names, p })
}

/// Names a column that lies in the span of earlier ones, with the earlier
/// columns it depends on.
fn check_rank(d: &Design) -> Result<()> {
    let (n, cols) = d.x.shape();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut owners: Vec<Vec<f64>> = Vec::new();
    for j in 0..cols {
        let col = d.x.column(j).into_owned();
        let norm = col.norm();
        let mut r = col.clone();
        // Coefficients of r in terms of the original columns 0..j.
        let mut combo = vec![0.0; cols];
        combo[j] = 1.0;
        for _ in 0..2 {
            for (q, own) in basis.iter().zip(&owners) {
                let c = q.dot(&r);
                r -= q * c;
                for (a, o) in combo.iter_mut().zip(own) {
                    *a -= c * o;
                }
            }
        }
        let rn = r.norm();
        if n == 0 || rn <= COLLINEAR_TOL * norm.max(1.0) || norm == 0.0 {
            let mut columns: Vec<String> = (0..j)
                .filter(|&a| combo[a].abs() > 1e-8)
                .map(|a| d.names[a].clone())
                .collect();
            columns.push(d.names[j].clone());
            return Err(Error::Collinearity { columns });
        }
        basis.push(r / rn);
        owners.push(combo.iter().map(|c| c / rn).collect());
    }
    Ok(())
}

/// Fits on the Monte Carlo scores of `scores` (first `k` columns).
pub fn fit_gflm(
    scores: &ScoreSet,
    covariates: Option<&Covariates>,
    y: &[f64],
    link: Link,
    k: usize,
) -> Result<GflmFit> {
    if k > scores.k {
        return Err(Error::domain(format!(
            "K = {k} exceeds the {} available scores",
            scores.k
        )));
    }
    fit_gflm_rows(&scores.scores, covariates, y, link, k)
}

/// Fits on explicit score rows.
pub fn fit_gflm_rows(
    score_rows: &[Vec<f64>],
    covariates: Option<&Covariates>,
    y: &[f64],
    link: Link,
    k: usize,
) -> Result<GflmFit> {
    let n = score_rows.len();
    if y.len() != n {
        return Err(Error::domain(format!("{} responses for {n} units", y.len())));
    }
    let d = design(score_rows, covariates, k)?;
    if n < d.x.ncols() {
        return Err(Error::domain(format!(
            "n = {n} is too small for {} coefficients",
            d.x.ncols()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) || d.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in design or response"));
    }
    check_rank(&d)?;
    let yv = DVector::from_column_slice(y);
    let (beta, se, dispersion, info) = match link {
        Link::Identity => least_squares(&d.x, &yv)?,
        Link::Logit => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::domain("logit link needs responses in {0, 1}"));
            }
            irls(&d.x, &yv)?
        }
    };
    Ok(GflmFit {
        link,
        k,
        intercept: beta[0],
        covariate_coeffs: beta.rows(1, d.p).iter().copied().collect(),
        score_coeffs: beta.rows(1 + d.p, k).iter().copied().collect(),
        standard_errors: se,
        column_names: d.names,
        dispersion,
        fit_info: info,
    })
}

fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Conditioning {
            min_eigenvalue: m.clone().symmetric_eigenvalues().min(),
            condition: f64::INFINITY,
        })
}

fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, Vec<f64>, f64, FitInfo)> {
    let (n, p) = x.shape();
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    let r = qr.r();
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::domain("least squares: singular triangular factor"))?;
    let resid = y - x * &beta;
    let rss = resid.norm_squared();
    let dispersion = if n > p { rss / (n - p) as f64 } else { 0.0 };
    let xtx_inv = inverse_spd(&(x.transpose() * x))?;
    let se = (0..p).map(|j| (dispersion * xtx_inv[(j, j)]).max(0.0).sqrt()).collect();
    let sigma2 = (rss / n as f64).max(f64::MIN_POSITIVE);
    let log_likelihood = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let gradient_norm = (x.transpose() * &resid).amax();
    Ok((
        beta,
        se,
        dispersion,
        FitInfo {
            log_likelihood,
            iterations: 1,
            converged: true,
            gradient_norm,
            separation: false,
        },
    ))
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^η)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn logit_loglik(eta: &DVector<f64>, y: &DVector<f64>) -> f64 {
    eta.iter().zip(y.iter()).map(|(&e, &v)| v * e - softplus(e)).sum()
}

fn logit_info(x: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
    let w = DVector::from_iterator(
        eta.len(),
        eta.iter().map(|&e| {
            let p = sigmoid(e);
            p * (1.0 - p)
        }),
    );
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    x.transpose() * xw
}

fn irls(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, Vec<f64>, f64, FitInfo)> {
    let p = x.ncols();
    let mut beta = DVector::zeros(p);
    let mut eta = x * &beta;
    let mut ll = logit_loglik(&eta, y);
    let mut iterations = 0;
    let mut separation = false;
    let mut gradient_norm;
    loop {
        let mu = eta.map(sigmoid);
        let grad = x.transpose() * (y - &mu);
        gradient_norm = grad.amax();
        if gradient_norm < GRAD_TOL || iterations >= MAX_ITER {
            break;
        }
        iterations += 1;
        let info = logit_info(x, &eta);
        let Some(chol) = info.cholesky() else {
            separation = eta.amax() > SEPARATION_ETA;
            break;
        };
        let step = chol.solve(&grad);
        // Near the optimum the gain falls below rounding in the log-likelihood.
        let slack = 1e-12 * ll.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &beta + &step * t;
            let cand_eta = x * &cand;
            let cand_ll = logit_loglik(&cand_eta, y);
            if cand_ll >= ll - slack {
                accepted = Some((cand, cand_eta, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((b, e, l)) = accepted else { break };
        let increased = l > ll;
        beta = b;
        eta = e;
        ll = l;
        if eta.amax() > SEPARATION_ETA && increased {
            separation = true;
            let mu = eta.map(sigmoid);
            gradient_norm = (x.transpose() * (y - &mu)).amax();
            break;
        }
    }
    let se = match inverse_spd(&logit_info(x, &eta)) {
        Ok(inv) => (0..p).map(|j| inv[(j, j)].max(0.0).sqrt()).collect(),
        Err(_) => vec![f64::INFINITY; p],
    };
    Ok((
        beta,
        se,
        1.0,
        FitInfo {
            log_likelihood: ll,
            iterations,
            converged: gradient_norm < GRAD_TOL,
            gradient_norm,
            separation,
        },
    ))
}

fn linear_predictor(fit: &GflmFit, score_row: &[f64], x_row: &[f64]) -> f64 {
    fit.intercept
        + fit.covariate_coeffs.iter().zip(x_row).map(|(a, b)| a * b).sum::<f64>()
        + fit.score_coeffs.iter().zip(score_row).map(|(a, b)| a * b).sum::<f64>()
}

fn check_rows(fit: &GflmFit, score_rows: &[Vec<f64>], covariates: Option<&Covariates>) -> Result<()> {
    let p = fit.covariate_coeffs.len();
    if score_rows.iter().any(|r| r.len() < fit.k) {
        return Err(Error::domain(format!("score rows shorter than K = {}", fit.k)));
    }
    match covariates {
        None if p > 0 => Err(Error::domain(format!("fit expects {p} covariates"))),
        Some(c) if c.rows.len() != score_rows.len() || c.rows.iter().any(|r| r.len() != p) => {
            Err(Error::domain("covariate dimensions do not match the fit"))
        }
        _ => Ok(()),
    }
}

/// Mean response: the linear predictor (identity) or the probability (logit).
pub fn predict_gflm(fit: &GflmFit, score_rows: &[Vec<f64>], covariates: Option<&Covariates>) -> Result<Vec<f64>> {
    check_rows(fit, score_rows, covariates)?;
    Ok(score_rows
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let x_row: &[f64] = covariates.map_or(&[], |c| &c.rows[i]);
            inverse_link(fit.link, linear_predictor(fit, s, x_row))
        })
        .collect())
}

/// Averages the inverse link over per-draw scores instead of plugging in
/// their mean; identical to [`predict_gflm`] for the identity link.
pub fn predict_gflm_averaged(
    fit: &GflmFit,
    draws: &[Vec<Vec<f64>>],
    covariates: Option<&Covariates>,
) -> Result<Vec<f64>> {
    let firsts: Vec<Vec<f64>> = draws.iter().map(|d| d.first().cloned().unwrap_or_default()).collect();
    check_rows(fit, &firsts, covariates)?;
    draws
        .iter()
        .enumerate()
        .map(|(i, unit)| {
            if unit.is_empty() {
                return Err(Error::domain("a unit has no score draws"));
            }
            let x_row: &[f64] = covariates.map_or(&[], |c| &c.rows[i]);
            let total: f64 = unit
                .iter()
                .map(|s| inverse_link(fit.link, linear_predictor(fit, s, x_row)))
                .sum();
            Ok(total / unit.len() as f64)
        })
        .collect()
}

pub fn inverse_link(link: Link, eta: f64) -> f64 {
    match link {
        Link::Identity => eta,
        Link::Logit => sigmoid(eta),
    }
}

/// Labels at the 0.5 probability threshold.
pub fn classify(probabilities: &[f64]) -> Vec<u8> {
    probabilities.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::cumulative_fve;

    fn eigen_with(values: &[f64]) -> EigenSystem {
        EigenSystem {
            grid: vec![0.0; values.len()],
            eigenvalues: values.to_vec(),
            eigenvectors: vec![vec![0.0; values.len()]; values.len()],
            quad_weights: vec![1.0; values.len()],
            fve: cumulative_fve(values),
        }
    }

    #[test]
    fn fve_selection() {
        assert_eq!(select_k_fve(&eigen_with(&[4.0, 2.0, 1.0, 1.0]), 0.75).unwrap(), 2);
        assert_eq!(select_k_fve(&eigen_with(&[4.0, 2.0, 1.0, 0.0]), 1.0).unwrap(), 3);
        assert_eq!(select_k_fve(&eigen_with(&[3.0, 0.0, 0.0]), 0.99).unwrap(), 1);
        assert!(matches!(
            select_k_fve(&eigen_with(&[0.0, 0.0]), 0.5),
            Err(Error::DegenerateSpectrum)
        ));
        assert!(select_k_fve(&eigen_with(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn stable_logistic_pieces() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(-40.0) + sigmoid(40.0) - 1.0).abs() < 1e-15);
    }
}
