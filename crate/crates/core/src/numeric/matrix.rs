use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symmetric matrix. Every mutation writes both triangles, so
/// `m[(i, j)] == m[(j, i)]` holds bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.0[(i, i)] = d;
        }
        m
    }

    /// Builds from the upper triangle of `f(i, j)` for `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Copies the upper triangle over the lower one.
    pub fn from_upper(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::domain(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_fn(m.nrows(), |i, j| m[(i, j)]))
    }

    /// Averages the two triangles.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        Self::from_fn(idx.len(), |a, b| self.0[(idx[a], idx[b])])
    }

    pub fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.0.clone())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.eigen().eigenvalues.min()
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Rebuilds `V diag(max(λ, floor)) Vᵀ` and symmetrizes.
    pub fn clamp_eigenvalues(&self, floor: f64) -> SymMatrix {
        let eig = self.eigen();
        let lambda = eig.eigenvalues.map(|l| l.max(floor));
        let v = &eig.eigenvectors;
        let rebuilt = v * DMatrix::from_diagonal(&lambda) * v.transpose();
        Self::symmetrize(&rebuilt)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::domain("matrix rows have inconsistent lengths"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        for i in 0..n {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::domain(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(SymMatrix(m))
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Cholesky-based positive-definiteness probe of `m + shift·I`.
pub(crate) fn is_pd_shifted(m: &DMatrix<f64>, shift: f64) -> bool {
    let n = m.nrows();
    // In-place LLᵀ on the lower triangle; bails at the first non-positive pivot.
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m[(j, j)] + shift;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    true
}
