//! Data generators for the five simulation settings.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{apply_truncation, Bounds, FunctionalDataset, ObservationPoint, Trajectory};
use crate::error::{Error, Result};
use crate::numeric::{eigen_decompose_psd, quad_inner, trapezoid_weights, EigenSystem, SymMatrix};

/// Seed for the random eigenvectors φ₃, φ₄, … of Case 5. The covariance
/// truth is shared by every replicate; only the sample varies with `seed`.
pub const DEFAULT_STRUCTURE_SEED: u64 = 0x5EED_CA5E;

const NOISE_VAR: f64 = 0.05;
const PSI: f64 = 0.5;
const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimCase {
    pub case_id: u8,
    pub n: usize,
    pub g: usize,
    pub bounds: Bounds,
    pub seed: u64,
    pub structure_seed: u64,
}

impl SimCase {
    pub fn new(case_id: u8, n: usize, seed: u64) -> Self {
        SimCase {
            case_id,
            n,
            g: 15,
            bounds: Bounds { a: -1.0, b: 1.0 },
            seed,
            structure_seed: DEFAULT_STRUCTURE_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.case_id) {
            return Err(Error::Config(format!("case must be 1..5, got {}", self.case_id)));
        }
        if self.g < 3 {
            return Err(Error::Config(format!("need g >= 3, got {}", self.g)));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("need n >= 2, got {}", self.n)));
        }
        if self.case_id == 3 && !self.g.is_multiple_of(3) {
            return Err(Error::Config("case 3 needs g divisible by 3".into()));
        }
        Bounds::new(self.bounds.a, self.bounds.b)?;
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.g)
    }
}

pub fn uniform_grid(g: usize) -> Vec<f64> {
    if g == 1 {
        return vec![0.0];
    }
    (0..g).map(|i| i as f64 / (g - 1) as f64).collect()
}

pub fn true_mean(t: f64) -> f64 {
    (2.0 * PI * t).sin()
}

/// Population quantities of one setting on its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStructure {
    pub grid: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: SymMatrix,
    pub noise: Vec<f64>,
    pub eigen: EigenSystem,
}

impl CaseStructure {
    pub fn sigma_tilde(&self) -> SymMatrix {
        let mut m = self.sigma.clone();
        for (i, &s2) in self.noise.iter().enumerate() {
            m.set(i, i, m[(i, i)] + s2);
        }
        m
    }

    /// Noise over total variance at each gridpoint.
    pub fn noise_fraction(&self) -> Vec<f64> {
        self.noise
            .iter()
            .enumerate()
            .map(|(i, &s2)| s2 / (self.sigma[(i, i)] + s2))
            .collect()
    }
}

fn ar1(g: usize, rho: f64) -> SymMatrix {
    SymMatrix::from_fn(g, |i, j| PSI * rho.powi(i.abs_diff(j) as i32))
}

pub fn case_structure(cfg: &SimCase) -> Result<CaseStructure> {
    cfg.validate()?;
    let g = cfg.g;
    let grid = cfg.grid();
    let mu: Vec<f64> = grid.iter().map(|&t| true_mean(t)).collect();
    let mut noise = vec![NOISE_VAR; g];
    let sigma = match cfg.case_id {
        1 => SymMatrix::from_diagonal(&vec![PSI; g]),
        2 => ar1(g, 0.9),
        3 => {
            let block = g / 3;
            let rhos: [f64; 3] = [0.5, 0.7, 0.9];
            SymMatrix::from_fn(g, |i, j| {
                if i / block == j / block {
                    PSI * rhos[i / block].powi(i.abs_diff(j) as i32)
                } else {
                    0.0
                }
            })
        }
        4 => {
            for (s2, &m) in noise.iter_mut().zip(&mu) {
                if m < -0.5 {
                    *s2 *= 2.0;
                } else if m > 0.5 {
                    *s2 *= 0.5;
                }
            }
            ar1(g, 0.9)
        }
        _ => case5_sigma(&grid, cfg.structure_seed)?,
    };
    let eigen = eigen_decompose_psd(&sigma, &grid)?;
    Ok(CaseStructure {
        grid,
        mu,
        sigma,
        noise,
        eigen,
    })
}

pub fn case5_phi1(t: f64) -> f64 {
    -SQRT_2 * (PI * t).cos()
}

pub fn case5_phi2(t: f64) -> f64 {
    -SQRT_2 * (PI * t).sin()
}

/// `Σ λ_k φ_k φ_kᵀ` with λ_k = 1/(14k²), φ₁ and φ₂ fixed and the rest seeded
/// random vectors, all orthonormalized in the quadrature inner product.
fn case5_sigma(grid: &[f64], structure_seed: u64) -> Result<SymMatrix> {
    let g = grid.len();
    let w = trapezoid_weights(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(structure_seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(g);
    let mut candidates = vec![
        grid.iter().map(|&t| case5_phi1(t)).collect::<Vec<f64>>(),
        grid.iter().map(|&t| case5_phi2(t)).collect(),
    ];
    while basis.len() < g {
        let mut v = if candidates.is_empty() {
            (0..g).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        } else {
            candidates.remove(0)
        };
        // Two passes of modified Gram–Schmidt.
        for _ in 0..2 {
            for b in &basis {
                let c = quad_inner(&w, &v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = quad_inner(&w, &v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    Ok(SymMatrix::from_fn(g, |i, j| {
        basis
            .iter()
            .enumerate()
            .map(|(k, phi)| phi[i] * phi[j] / (14.0 * ((k + 1) * (k + 1)) as f64))
            .sum()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub case: SimCase,
    pub structure: CaseStructure,
    /// Latent `Z_i` on the full grid, one row per unit.
    pub latent: Vec<Vec<f64>>,
    /// `ξ_{i,k} = ∫ (Z_i − μ) φ_k` by quadrature, one row per unit.
    pub scores: Vec<Vec<f64>>,
    /// `∫ (Z_i − μ) β` with β ≡ 1 plus N(0, 1) noise.
    pub response_identity: Vec<f64>,
    /// `1{∫ (Z_i − μ) β > 0}`.
    pub response_binary: Vec<f64>,
}

impl SimTruth {
    pub fn mu(&self) -> &[f64] {
        &self.structure.mu
    }
}

pub fn generate_case(cfg: &SimCase) -> Result<(FunctionalDataset, SimTruth)> {
    let structure = case_structure(cfg)?;
    Ok(generate_with(cfg, structure))
}

/// Draws a sample from a precomputed structure (which must match `cfg`).
pub fn generate_with(cfg: &SimCase, structure: CaseStructure) -> (FunctionalDataset, SimTruth) {
    let g = cfg.g;
    let root = matrix_root(&structure.sigma);
    let w = &structure.eigen.quad_weights;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trajectories = Vec::with_capacity(cfg.n);
    let mut latent = Vec::with_capacity(cfg.n);
    let mut scores = Vec::with_capacity(cfg.n);
    let mut response_identity = Vec::with_capacity(cfg.n);
    let mut response_binary = Vec::with_capacity(cfg.n);
    let width = (g + 1).saturating_sub(MIN_POINTS.min(g)).max(1);

    for i in 0..cfg.n {
        let z = DVector::from_fn(g, |_, _| rng.sample::<f64, _>(StandardNormal));
        let dev = &root * z;
        let zi: Vec<f64> = (0..g).map(|j| structure.mu[j] + dev[j]).collect();
        let count = MIN_POINTS.min(g) + rng.random_range(0..width);
        let mut idx = sample(&mut rng, g, count).into_vec();
        idx.sort_unstable();
        let points: Vec<ObservationPoint> = idx
            .iter()
            .map(|&j| {
                let e: f64 = rng.sample(StandardNormal);
                ObservationPoint {
                    time: structure.grid[j],
                    value: zi[j] + structure.noise[j].sqrt() * e,
                    flag: crate::dataset::Flag::None,
                }
            })
            .collect();
        let omega: f64 = rng.sample(StandardNormal);
        let dev: Vec<f64> = dev.iter().copied().collect();
        let integral: f64 = dev.iter().zip(w).map(|(d, w)| d * w).sum();
        scores.push(
            structure
                .eigen
                .eigenvectors
                .iter()
                .map(|phi| quad_inner(w, &dev, phi))
                .collect(),
        );
        response_identity.push(integral + omega);
        response_binary.push(if integral > 0.0 { 1.0 } else { 0.0 });
        latent.push(zi);
        trajectories.push(apply_truncation(
            &Trajectory {
                unit_id: format!("u{:04}", i + 1),
                points,
            },
            cfg.bounds,
        ));
    }
    let ds = FunctionalDataset::new(trajectories, cfg.bounds);
    let truth = SimTruth {
        case: *cfg,
        structure,
        latent,
        scores,
        response_identity,
        response_binary,
    };
    (ds, truth)
}

/// Symmetric square root `V Λ^{1/2}` of a PSD matrix (a valid sampling factor).
fn matrix_root(sigma: &SymMatrix) -> nalgebra::DMatrix<f64> {
    let eig = sigma.eigen();
    let mut v = eig.eigenvectors.clone();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        v.column_mut(k).scale_mut(s);
    }
    v
}
