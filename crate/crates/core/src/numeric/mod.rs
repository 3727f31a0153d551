//! Numerical building blocks: normal distribution functions, symmetric
//! matrices, Gaussian conditioning, PSD projection, truncated sampling and
//! quadrature eigendecomposition.

mod bvn;
mod eigen;
mod gaussian;
pub mod interp;
mod matrix;
mod normal;
mod psd;
mod tmvn;

pub use bvn::{bivariate_normal_cdf, bivariate_normal_pdf};
pub(crate) use bvn::{bvn_lower, ln_bivariate_normal_pdf, ln_bvn_lower};
pub(crate) use eigen::check_grid;
pub use eigen::{cumulative_fve, eigen_decompose_psd, quad_inner, trapezoid_weights, EigenSystem};
pub use gaussian::{conditional_gaussian, GaussianPartition, DEFAULT_CONDITION_CAP};
pub(crate) use matrix::is_pd_shifted;
pub use matrix::SymMatrix;
pub use normal::{
    floored_ln, inverse_mills, log_normal_cdf, log_normal_pdf, normal_cdf, normal_pdf, normal_quantile, LOG_PROB_FLOOR,
};
pub(crate) use normal::{phi_cdf, LN_SQRT_2PI};
pub use psd::{nearest_psd, PSD_TOL};
pub use tmvn::{sample_truncated_mvn, sample_truncated_mvn_with, truncated_normal, GibbsConfig};
