//! Nearest positive semi-definite matrix, optionally holding the diagonal fixed
//! (alternating projections with Dykstra's correction).

use nalgebra::DMatrix;

use super::SymMatrix;
use crate::error::{Error, Result};

pub const PSD_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 500;
const STOP_CHANGE: f64 = 1e-9;

pub fn nearest_psd(m: &SymMatrix, fix_diagonal: bool) -> Result<SymMatrix> {
    if !m.is_finite() {
        return Err(Error::domain("nearest_psd input has non-finite entries"));
    }
    if m.is_psd(PSD_TOL) {
        return Ok(m.clone());
    }
    if !fix_diagonal {
        return Ok(m.clamp_eigenvalues(0.0));
    }
    let target = m.diagonal();
    if target.iter().any(|&d| d < 0.0) {
        return Err(Error::domain("cannot hold a negative diagonal fixed in a PSD matrix"));
    }

    let mut y = m.as_matrix().clone();
    let mut correction = DMatrix::zeros(m.dim(), m.dim());
    let mut last_change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let r = &y - &correction;
        let x = SymMatrix::symmetrize(&r).clamp_eigenvalues(0.0).into_matrix();
        correction = &x - &r;
        let mut next = x;
        for (i, &d) in target.iter().enumerate() {
            next[(i, i)] = d;
        }
        last_change = (&next - &y).norm();
        y = next;
        if last_change < STOP_CHANGE {
            return Ok(finish(&y, &target));
        }
    }
    Err(Error::Convergence {
        iterations: MAX_SWEEPS,
        last_change,
        last: Box::new(finish(&y, &target)),
    })
}

/// Projects onto the PSD cone and rescales by a diagonal congruence so the
/// target diagonal is met exactly without leaving the cone.
fn finish(y: &DMatrix<f64>, target: &[f64]) -> SymMatrix {
    let psd = SymMatrix::symmetrize(y).clamp_eigenvalues(0.0);
    let scale: Vec<f64> = target
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let cur = psd[(i, i)];
            if cur > 0.0 {
                (d / cur).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut out = SymMatrix::from_fn(psd.dim(), |i, j| scale[i] * psd[(i, j)] * scale[j]);
    for (i, &d) in target.iter().enumerate() {
        out.set(i, i, d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psd_input_is_untouched() {
        let m = SymMatrix::from_fn(3, |i, j| if i == j { 1.0 } else { 0.3 });
        let out = nearest_psd(&m, true).unwrap();
        assert_eq!(out.frobenius_distance(&m), 0.0);
    }

    /// Over unit-diagonal 2x2 matrices the only free entry is c, PSD iff |c| <= 1;
    /// brute-force the Frobenius-closest feasible c.
    #[test]
    fn two_by_two_matches_brute_force() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 1.5 });
        let mut best = (f64::INFINITY, 0.0);
        for step in 0..=20_000 {
            let c = -1.0 + step as f64 * 1e-4;
            let d = 2.0 * (c - 1.5f64).powi(2);
            if d < best.0 {
                best = (d, c);
            }
        }
        let out = nearest_psd(&m, true).unwrap();
        assert!((out[(0, 1)] - best.1).abs() < 1e-6);
        assert_eq!(out.diagonal(), vec![1.0, 1.0]);
        assert!(out.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn free_diagonal_is_eigen_clamp() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 2.0 });
        let out = nearest_psd(&m, false).unwrap();
        assert!((out[(0, 0)] - 1.5).abs() < 1e-12);
        assert!((out[(0, 1)] - 1.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn output_is_psd_with_exact_diagonal(entries in proptest::collection::vec(-1.0..1.0f64, 15), diag in proptest::collection::vec(0.2..2.0f64, 5)) {
            let mut k = 0;
            let m = SymMatrix::from_fn(5, |i, j| {
                if i == j { diag[i] } else { let v = entries[k] * 2.0; k += 1; v }
            });
            let out = nearest_psd(&m, true).unwrap();
            prop_assert!(out.min_eigenvalue() >= -1e-10);
            prop_assert_eq!(out.diagonal(), m.diagonal());
            let again = nearest_psd(&out, true).unwrap();
            prop_assert!(again.frobenius_distance(&out) < 1e-8);
        }
    }
}
