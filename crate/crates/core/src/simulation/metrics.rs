//! Error measures against simulation truth.

use serde::{Deserialize, Serialize};

use super::cases::CaseStructure;
use crate::covariance::CovarianceModel;
use crate::mean_variance::MeanVarianceEstimate;
use crate::numeric::{quad_inner, SymMatrix};

pub fn sse(estimate: &[f64], truth: &[f64]) -> f64 {
    estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Squared Frobenius distance on the grid.
pub fn frobenius_sse(estimate: &SymMatrix, truth: &SymMatrix) -> f64 {
    estimate.frobenius_distance(truth).powi(2)
}

/// `|⟨φ̂, φ⟩|` in the trapezoid inner product; eigenvector signs are arbitrary.
pub fn alignment(weights: &[f64], estimate: &[f64], reference: &[f64]) -> f64 {
    quad_inner(weights, estimate, reference).abs()
}

pub fn mse(predicted: &[f64], observed: &[f64]) -> f64 {
    sse(predicted, observed) / observed.len().max(1) as f64
}

/// Share of labels (0/1) reproduced by thresholding probabilities at 0.5.
pub fn accuracy(probabilities: &[f64], labels: &[f64]) -> f64 {
    let hits = probabilities
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= 0.5) == (y >= 0.5))
        .count();
    hits as f64 / labels.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMetrics {
    pub mean_sse: f64,
    pub cov_sse: f64,
    pub noise_sse: f64,
    /// SSE of the noise share σ̂²(t)/σ̃̂²(t).
    pub snr_sse: f64,
    pub phi1_alignment: f64,
}

/// Compares estimated surfaces with the truth; `phi1` is the reference
/// leading eigenfunction on the grid.
pub fn surface_metrics(
    mv: &MeanVarianceEstimate,
    model: &CovarianceModel,
    truth: &CaseStructure,
    phi1: &[f64],
) -> SurfaceMetrics {
    SurfaceMetrics {
        mean_sse: sse(&mv.mu_hat, &truth.mu),
        cov_sse: frobenius_sse(&model.sigma, &truth.sigma),
        noise_sse: sse(&model.noise_var, &truth.noise),
        snr_sse: sse(&model.noise_fraction(), &truth.noise_fraction()),
        phi1_alignment: model
            .eigen
            .eigenvectors
            .first()
            .map_or(0.0, |e| alignment(&model.eigen.quad_weights, e, phi1)),
    }
}
