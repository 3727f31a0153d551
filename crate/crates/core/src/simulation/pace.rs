//! Truncation-unaware comparator in the style of principal analysis by
//! conditional expectation: local-linear mean, two-dimensional local-linear
//! smoothing of raw covariances off the diagonal, local-linear smoothing of
//! raw variances, and eigenvalue clamping. Flags are ignored throughout.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::covariance::{CovarianceModel, PgdConfig};
use crate::dataset::FunctionalDataset;
use crate::error::{Error, Result};
use crate::kernel::{default_bandwidth_candidates, KernelSpec};
use crate::mean_variance::MeanVarianceEstimate;
use crate::numeric::{check_grid, eigen_decompose_psd, SymMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaceConfig {
    /// Mean bandwidth candidates; defaults to the stage-1 candidate set.
    pub mean_candidates: Option<Vec<f64>>,
    /// Covariance bandwidth candidates; defaults to the stage-1 candidate set.
    pub cov_candidates: Option<Vec<f64>>,
    /// Cross-validation folds, assigned by unit index.
    pub folds: usize,
}

impl Default for PaceConfig {
    fn default() -> Self {
        PaceConfig {
            mean_candidates: None,
            cov_candidates: None,
            folds: 5,
        }
    }
}

/// Observations pooled by exact time (or time pair): sum of responses and count.
#[derive(Debug, Clone, Default)]
struct Pooled<K> {
    cells: HashMap<K, (f64, f64)>,
}

impl<K: std::hash::Hash + Eq + Copy> Pooled<K> {
    fn add(&mut self, key: K, value: f64) {
        let e = self.cells.entry(key).or_insert((0.0, 0.0));
        e.0 += value;
        e.1 += 1.0;
    }

    fn sorted(&self) -> Vec<(K, f64, f64)>
    where
        K: Ord,
    {
        let mut v: Vec<(K, f64, f64)> = self.cells.iter().map(|(k, &(s, c))| (*k, s, c)).collect();
        v.sort_by_key(|a| a.0);
        v
    }
}

fn key(t: f64) -> u64 {
    t.to_bits()
}

fn time(k: u64) -> f64 {
    f64::from_bits(k)
}

/// Weighted local-linear fit in one dimension; local constant when the
/// design is too thin for a slope.
fn local_linear_1d(cells: &[(u64, f64, f64)], k: &KernelSpec, t0: f64) -> Option<f64> {
    let (mut s0, mut s1, mut s2, mut t0s, mut t1s) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(kt, sum, count) in cells {
        let d = time(kt) - t0;
        let w = k.weight(d);
        s0 += w * count;
        s1 += w * count * d;
        s2 += w * count * d * d;
        t0s += w * sum;
        t1s += w * sum * d;
    }
    if !(s0 > 0.0) {
        return None;
    }
    let det = s0 * s2 - s1 * s1;
    if det > 1e-10 * s0 * s2 && det > 0.0 {
        Some((s2 * t0s - s1 * t1s) / det)
    } else {
        Some(t0s / s0)
    }
}

fn local_linear_2d(cells: &[((u64, u64), f64, f64)], k: &KernelSpec, s0: f64, t0: f64) -> Option<f64> {
    let mut a = nalgebra::Matrix3::<f64>::zeros();
    let mut b = nalgebra::Vector3::<f64>::zeros();
    for &((ks, kt), sum, count) in cells {
        let (u, v) = (time(ks) - s0, time(kt) - t0);
        let w = k.weight2(u, v);
        if w == 0.0 {
            continue;
        }
        let x = nalgebra::Vector3::new(1.0, u, v);
        a += x * x.transpose() * (w * count);
        b += x * (w * sum);
    }
    if !(a[(0, 0)] > 0.0) {
        return None;
    }
    let scale = nalgebra::Vector3::new(1.0, a[(1, 1)].sqrt().max(1e-300), a[(2, 2)].sqrt().max(1e-300));
    let d = nalgebra::Matrix3::from_diagonal(&scale.map(|s| 1.0 / s));
    let scaled = d * a * d;
    let eig = scaled.symmetric_eigenvalues();
    let (min, max) = (eig.min(), eig.max());
    if min > 1e-10 * max {
        if let Some(sol) = a.lu().solve(&b) {
            return Some(sol[0]);
        }
    }
    Some(b[0] / a[(0, 0)])
}

fn pool_means(ds: &FunctionalDataset, units: impl Iterator<Item = usize>) -> Vec<(u64, f64, f64)> {
    let mut p = Pooled::default();
    for i in units {
        for pt in &ds.trajectories[i].points {
            p.add(key(pt.time), pt.value);
        }
    }
    p.sorted()
}

fn pool_products(
    ds: &FunctionalDataset,
    mu: &dyn Fn(f64) -> f64,
    units: impl Iterator<Item = usize>,
) -> (Vec<((u64, u64), f64, f64)>, Vec<(u64, f64, f64)>) {
    let mut off = Pooled::default();
    let mut diag = Pooled::default();
    for i in units {
        let pts = &ds.trajectories[i].points;
        let r: Vec<f64> = pts.iter().map(|p| p.value - mu(p.time)).collect();
        for a in 0..pts.len() {
            diag.add(key(pts[a].time), r[a] * r[a]);
            for b in 0..pts.len() {
                if a != b {
                    off.add((key(pts[a].time), key(pts[b].time)), r[a] * r[b]);
                }
            }
        }
    }
    (off.sorted(), diag.sorted())
}

fn select<F>(candidates: &[f64], mut score: F) -> Result<f64>
where
    F: FnMut(&KernelSpec) -> f64,
{
    let mut best: Option<(f64, f64)> = None;
    for &h in candidates {
        let s = score(&KernelSpec::gaussian(h)?);
        if s.is_finite() && best.is_none_or(|(_, b)| s < b) {
            best = Some((h, s));
        }
    }
    best.map(|(h, _)| h)
        .ok_or_else(|| Error::domain("no bandwidth candidate gave a finite cross-validation score"))
}

fn folds_of(n: usize, folds: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % folds == f);
            (train, test)
        })
        .filter(|(_, test)| !test.is_empty())
        .collect()
}

/// Mean, variance and covariance surfaces, returned in the shapes the
/// proposed pipeline produces.
pub fn fit_pace(
    ds: &FunctionalDataset,
    grid: &[f64],
    cfg: &PaceConfig,
) -> Result<(MeanVarianceEstimate, CovarianceModel)> {
    check_grid(grid)?;
    if ds.n() < 2 {
        return Err(Error::domain("need at least two trajectories"));
    }
    if cfg.folds < 2 {
        return Err(Error::Config("cross-validation needs at least two folds".into()));
    }
    let defaults = default_bandwidth_candidates(grid);
    let mean_candidates = cfg.mean_candidates.as_deref().unwrap_or(&defaults);
    let cov_candidates = cfg.cov_candidates.as_deref().unwrap_or(&defaults);
    let folds = folds_of(ds.n(), cfg.folds.min(ds.n()));

    let pooled_folds: Vec<(Vec<(u64, f64, f64)>, &Vec<usize>)> = folds
        .iter()
        .map(|(train, test)| (pool_means(ds, train.iter().copied()), test))
        .collect();
    let h_mean = select(mean_candidates, |k| {
        let mut sse = 0.0;
        for (cells, test) in &pooled_folds {
            for &i in *test {
                for p in &ds.trajectories[i].points {
                    match local_linear_1d(cells, k, p.time) {
                        Some(m) => sse += (p.value - m).powi(2),
                        None => return f64::INFINITY,
                    }
                }
            }
        }
        sse
    })?;
    let k_mean = KernelSpec::gaussian(h_mean)?;
    let all = pool_means(ds, 0..ds.n());
    let mu_hat = grid
        .iter()
        .map(|&t| local_linear_1d(&all, &k_mean, t).ok_or(Error::EmptyWindow { t }))
        .collect::<Result<Vec<f64>>>()?;
    let mu_at = |t: f64| crate::numeric::interp::interp_linear(grid, &mu_hat, t);

    let prod_folds: Vec<_> = folds
        .iter()
        .map(|(train, test)| {
            (
                pool_products(ds, &mu_at, train.iter().copied()).0,
                pool_products(ds, &mu_at, test.iter().copied()).0,
            )
        })
        .collect();
    let h_cov = select(cov_candidates, |k| {
        let mut sse = 0.0;
        for (cells, held) in &prod_folds {
            for &((ks, kt), sum, count) in held {
                match local_linear_2d(cells, k, time(ks), time(kt)) {
                    // Σ over the cell of (c − m)² up to a constant in m.
                    Some(m) => sse += count * m * m - 2.0 * m * sum,
                    None => return f64::INFINITY,
                }
            }
        }
        sse
    })?;
    let k_cov = KernelSpec::gaussian(h_cov)?;
    let (off, diag) = pool_products(ds, &mu_at, 0..ds.n());
    let g = grid.len();
    let mut raw = vec![0.0; g * g];
    for i in 0..g {
        for j in i..g {
            let v = local_linear_2d(&off, &k_cov, grid[i], grid[j]).ok_or(Error::EmptyWindow { t: grid[i] })?;
            raw[i * g + j] = v;
            raw[j * g + i] = v;
        }
    }
    let smoothed = SymMatrix::from_fn(g, |i, j| 0.5 * (raw[i * g + j] + raw[j * g + i]));
    let total = grid
        .iter()
        .map(|&t| local_linear_1d(&diag, &k_mean, t).ok_or(Error::EmptyWindow { t }))
        .collect::<Result<Vec<f64>>>()?;
    let noise_var: Vec<f64> = (0..g).map(|i| (total[i] - smoothed[(i, i)]).max(0.0)).collect();
    let sigma = smoothed.clamp_eigenvalues(0.0);
    let sigma_tilde = SymMatrix::from_fn(g, |i, j| sigma[(i, j)] + if i == j { noise_var[i] } else { 0.0 });
    let eigen = eigen_decompose_psd(&sigma, grid)?;
    let mv = MeanVarianceEstimate {
        grid: grid.to_vec(),
        mu_hat,
        sigma_tilde_sq_hat: sigma_tilde.diagonal(),
        bandwidth: h_mean,
        local_bandwidths: vec![h_mean; g],
    };
    let model = CovarianceModel {
        grid: grid.to_vec(),
        sigma_tilde,
        sigma,
        noise_var,
        eigen,
        bandwidth: h_cov,
        mean_bandwidth: h_mean,
        pgd: None,
        pseudo_likelihood: None,
        pgd_config: PgdConfig::default(),
    };
    Ok((mv, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_linear_reproduces_lines() {
        let cells: Vec<(u64, f64, f64)> = (0..10)
            .map(|i| {
                let t = i as f64 / 9.0;
                (key(t), 2.0 * (1.0 - 3.0 * t), 2.0)
            })
            .collect();
        let k = KernelSpec::gaussian(0.2).unwrap();
        for t0 in [0.0, 0.37, 1.0] {
            let m = local_linear_1d(&cells, &k, t0).unwrap();
            assert!((m - (1.0 - 3.0 * t0)).abs() < 1e-10);
        }
    }

    #[test]
    fn local_linear_2d_reproduces_planes() {
        let mut cells = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                let (s, t) = (i as f64 / 7.0, j as f64 / 7.0);
                if i != j {
                    cells.push(((key(s), key(t)), 0.5 + s - 2.0 * t, 1.0));
                }
            }
        }
        let k = KernelSpec::gaussian(0.15).unwrap();
        for (s, t) in [(0.0, 0.0), (0.5, 0.5), (0.9, 0.2)] {
            let m = local_linear_2d(&cells, &k, s, t).unwrap();
            assert!((m - (0.5 + s - 2.0 * t)).abs() < 1e-9);
        }
    }
}
