pub mod covariance;
pub mod dataset;
pub mod error;
pub mod gflm;
pub mod kernel;
pub mod mean_variance;
pub mod numeric;
pub mod scores;
pub mod simulation;

pub use error::{Error, Result};
