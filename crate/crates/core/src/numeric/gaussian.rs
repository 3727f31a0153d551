//! Conditioning of partitioned multivariate Gaussian vectors.

use nalgebra::{DMatrix, DVector};

use super::SymMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// `(X₁, X₂) ~ N((μ₁, μ₂), [[Σ₁₁, Σ₁₂], [Σ₂₁, Σ₂₂]])`.
#[derive(Debug, Clone)]
pub struct GaussianPartition {
    pub mu1: DVector<f64>,
    pub mu2: DVector<f64>,
    pub s11: SymMatrix,
    pub s12: DMatrix<f64>,
    pub s22: SymMatrix,
}

impl GaussianPartition {
    pub fn new(
        mu1: DVector<f64>,
        mu2: DVector<f64>,
        s11: SymMatrix,
        s12: DMatrix<f64>,
        s22: SymMatrix,
    ) -> Result<Self> {
        let (p1, p2) = (mu1.len(), mu2.len());
        if s11.dim() != p1 || s22.dim() != p2 || s12.nrows() != p1 || s12.ncols() != p2 {
            return Err(Error::domain(format!(
                "partition blocks inconsistent with sizes ({p1}, {p2})"
            )));
        }
        Ok(GaussianPartition {
            mu1,
            mu2,
            s11,
            s12,
            s22,
        })
    }

    /// Splits a joint law by index sets.
    pub fn split(mean: &DVector<f64>, cov: &SymMatrix, first: &[usize], second: &[usize]) -> Result<Self> {
        let mu1 = DVector::from_iterator(first.len(), first.iter().map(|&i| mean[i]));
        let mu2 = DVector::from_iterator(second.len(), second.iter().map(|&i| mean[i]));
        let s12 = DMatrix::from_fn(first.len(), second.len(), |a, b| cov[(first[a], second[b])]);
        Self::new(mu1, mu2, cov.submatrix(first), s12, cov.submatrix(second))
    }
}

/// Law of `X₁ | X₂ = x₂`: mean `μ₁ + Σ₁₂Σ₂₂⁻¹(x₂−μ₂)`, covariance `Σ₁₁ − Σ₁₂Σ₂₂⁻¹Σ₂₁`.
pub fn conditional_gaussian(
    p: &GaussianPartition,
    x2: &DVector<f64>,
    condition_cap: f64,
) -> Result<(DVector<f64>, SymMatrix)> {
    if x2.len() != p.mu2.len() {
        return Err(Error::domain("conditioning vector has wrong length"));
    }
    if p.mu2.is_empty() {
        return Ok((p.mu1.clone(), p.s11.clone()));
    }
    let eig = p.s22.eigen();
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if min <= 0.0 || condition > condition_cap {
        return Err(Error::Conditioning {
            min_eigenvalue: min,
            condition,
        });
    }
    let chol = p.s22.as_matrix().clone().cholesky().ok_or(Error::Conditioning {
        min_eigenvalue: min,
        condition,
    })?;
    let resid = x2 - &p.mu2;
    let mean = &p.mu1 + &p.s12 * chol.solve(&resid);
    let gain = chol.solve(&p.s12.transpose());
    let cov = p.s11.as_matrix() - &p.s12 * gain;
    let mut cov = SymMatrix::symmetrize(&cov);
    if cov.dim() > 0 && cov.min_eigenvalue() < 0.0 {
        cov = cov.clamp_eigenvalues(0.0);
    }
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bivariate(rho: f64) -> GaussianPartition {
        GaussianPartition::new(
            DVector::from_element(1, 0.0),
            DVector::from_element(1, 0.0),
            SymMatrix::identity(1),
            DMatrix::from_element(1, 1, rho),
            SymMatrix::identity(1),
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluated_bivariate() {
        let (m, c) = conditional_gaussian(&bivariate(0.9), &DVector::from_element(1, 1.0), 1e12).unwrap();
        assert!((m[0] - 0.9).abs() < 1e-15);
        assert!((c[(0, 0)] - 0.19).abs() < 1e-15);
    }

    #[test]
    fn independence_returns_marginal() {
        let p = GaussianPartition::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![-1.0]),
            SymMatrix::from_fn(2, |i, j| if i == j { 2.0 } else { 0.3 }),
            DMatrix::zeros(2, 1),
            SymMatrix::identity(1),
        )
        .unwrap();
        let (m, c) = conditional_gaussian(&p, &DVector::from_element(1, 5.0), 1e12).unwrap();
        assert_eq!(m, p.mu1);
        assert_eq!(c, p.s11);
    }

    #[test]
    fn conditioning_at_mean_keeps_mean() {
        let (m, _) = conditional_gaussian(&bivariate(-0.4), &DVector::from_element(1, 0.0), 1e12).unwrap();
        assert_eq!(m[0], 0.0);
    }

    #[test]
    fn singular_block_is_rejected() {
        let p = GaussianPartition::new(
            DVector::from_element(1, 0.0),
            DVector::from_element(2, 0.0),
            SymMatrix::identity(1),
            DMatrix::from_element(1, 2, 0.1),
            SymMatrix::from_fn(2, |_, _| 1.0),
        )
        .unwrap();
        let err = conditional_gaussian(&p, &DVector::zeros(2), 1e12).unwrap_err();
        assert!(matches!(err, Error::Conditioning { .. }));
    }

    #[test]
    fn conditional_covariance_is_loewner_smaller() {
        let cov = SymMatrix::from_fn(5, |i, j| {
            0.8f64.powi((i as i32 - j as i32).abs()) + if i == j { 0.1 } else { 0.0 }
        });
        let mean = DVector::from_fn(5, |i, _| i as f64 * 0.2);
        let p = GaussianPartition::split(&mean, &cov, &[0, 3], &[1, 2, 4]).unwrap();
        let (_, c) = conditional_gaussian(&p, &DVector::from_vec(vec![0.5, -0.2, 1.0]), 1e12).unwrap();
        let diff = SymMatrix::symmetrize(&(p.s11.as_matrix() - c.as_matrix()));
        assert!(diff.min_eigenvalue() >= -1e-8);
    }
}
