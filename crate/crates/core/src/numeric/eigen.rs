//! Quadrature-weighted eigendecomposition of a covariance surface sampled on a grid.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::psd::PSD_TOL;
use super::SymMatrix;
use crate::error::{Error, Result};

/// Eigenpairs of the integral operator with kernel `m` under trapezoid quadrature.
///
/// Eigenvectors are function values on `grid`, orthonormal in the
/// quadrature inner product `Σ_g w_g φ_j(t_g) φ_k(t_g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub grid: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub quad_weights: Vec<f64>,
    /// Cumulative fraction of variance explained by the first k+1 components.
    pub fve: Vec<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > 0.0).count()
    }

    pub fn inner_product(&self, a: &[f64], b: &[f64]) -> f64 {
        quad_inner(&self.quad_weights, a, b)
    }

    /// `Σ_k λ_k φ_k φ_kᵀ` over the first `k` components.
    pub fn reconstruct(&self, k: usize) -> SymMatrix {
        let g = self.grid.len();
        SymMatrix::from_fn(g, |i, j| {
            (0..k.min(self.len()))
                .map(|c| self.eigenvalues[c] * self.eigenvectors[c][i] * self.eigenvectors[c][j])
                .sum()
        })
    }
}

pub fn quad_inner(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Trapezoid weights for a strictly increasing grid. A single point gets weight 1.
pub fn trapezoid_weights(grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let g = grid.len();
    if g == 1 {
        return Ok(vec![1.0]);
    }
    let mut w = vec![0.0; g];
    for i in 0..g - 1 {
        let half = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    Ok(w)
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("grid is empty"));
    }
    if grid.iter().any(|t| !t.is_finite() || !(0.0..=1.0).contains(t)) {
        return Err(Error::domain("grid points must lie in [0, 1]"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("grid must be strictly increasing"));
    }
    Ok(())
}

pub fn eigen_decompose_psd(m: &SymMatrix, grid: &[f64]) -> Result<EigenSystem> {
    let g = grid.len();
    if m.dim() != g {
        return Err(Error::domain(format!("matrix dim {} != grid length {g}", m.dim())));
    }
    let weights = trapezoid_weights(grid)?;
    let min = m.min_eigenvalue();
    if min < -PSD_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let root: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let scaled = DMatrix::from_fn(g, g, |i, j| root[i] * m[(i, j)] * root[j]);
    let eig = SymmetricEigen::new(scaled);

    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(g);
    let mut eigenvectors = Vec::with_capacity(g);
    for &k in &order {
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
        let mut phi: Vec<f64> = (0..g).map(|i| eig.eigenvectors[(i, k)] / root[i]).collect();
        orient(&mut phi, &weights);
        eigenvectors.push(phi);
    }
    let fve = cumulative_fve(&eigenvalues);
    Ok(EigenSystem {
        grid: grid.to_vec(),
        eigenvalues,
        eigenvectors,
        quad_weights: weights,
        fve,
    })
}

/// Sign convention: non-negative integral; ties go to a positive first nonzero entry.
fn orient(phi: &mut [f64], weights: &[f64]) {
    let integral: f64 = phi.iter().zip(weights).map(|(p, w)| p * w).sum();
    let scale = phi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let flip = if integral.abs() > 1e-10 * scale.max(1.0) {
        integral < 0.0
    } else {
        phi.iter()
            .find(|v| v.abs() > 1e-12 * scale)
            .map(|&v| v < 0.0)
            .unwrap_or(false)
    };
    if flip {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
}

pub fn cumulative_fve(eigenvalues: &[f64]) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().filter(|&&l| l > 0.0).sum();
    let mut acc = 0.0;
    eigenvalues
        .iter()
        .map(|&l| {
            acc += l.max(0.0);
            if total > 0.0 {
                (acc / total).min(1.0)
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn uniform(g: usize) -> Vec<f64> {
        (0..g).map(|i| i as f64 / (g - 1) as f64).collect()
    }

    #[test]
    fn scaled_identity() {
        let grid = uniform(11);
        let es = eigen_decompose_psd(&SymMatrix::from_diagonal(&[2.0; 11]), &grid).unwrap();
        let w = trapezoid_weights(&grid).unwrap();
        let mut expect: Vec<f64> = w.iter().map(|w| 2.0 * w).collect();
        expect.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in es.eigenvalues.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        for j in 0..11 {
            for k in 0..11 {
                let ip = es.inner_product(&es.eigenvectors[j], &es.eigenvectors[k]);
                assert!((ip - if j == k { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rank_one_cosine_round_trip() {
        let grid = uniform(15);
        let phi: Vec<f64> = grid.iter().map(|t| -(2.0f64).sqrt() * (PI * t).cos()).collect();
        let sigma = SymMatrix::from_fn(15, |i, j| phi[i] * phi[j] / 14.0);
        let es = eigen_decompose_psd(&sigma, &grid).unwrap();
        let ip = es.inner_product(&es.eigenvectors[0], &phi);
        assert!(ip.abs() > 0.99, "{ip}");
    }

    #[test]
    fn trace_and_reconstruction() {
        let grid = uniform(9);
        let sigma = SymMatrix::from_fn(9, |i, j| 0.5 * 0.9f64.powi((i as i32 - j as i32).abs()));
        let es = eigen_decompose_psd(&sigma, &grid).unwrap();
        let trace: f64 = es.quad_weights.iter().zip(sigma.diagonal()).map(|(w, d)| w * d).sum();
        let total: f64 = es.eigenvalues.iter().sum();
        assert!((trace - total).abs() < 1e-8);
        assert!(es.reconstruct(9).frobenius_distance(&sigma) < 1e-6);
        assert!((es.fve[8] - 1.0).abs() < 1e-12);
        assert!(es.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        for phi in &es.eigenvectors {
            let integral: f64 = phi.iter().zip(&es.quad_weights).map(|(p, w)| p * w).sum();
            assert!(integral >= -1e-10 * 10.0);
        }
    }

    #[test]
    fn rejects_indefinite_input() {
        let grid = uniform(2);
        let m = SymMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(matches!(eigen_decompose_psd(&m, &grid), Err(Error::NotPsd { .. })));
    }
}
