//! Simulation settings, comparison methods and Monte Carlo experiments.

mod cases;
mod experiment;
mod methods;
mod metrics;
mod pace;

pub use cases::{
    case5_phi1, case5_phi2, case_structure, generate_case, generate_with, true_mean, uniform_grid, CaseStructure,
    SimCase, SimTruth, DEFAULT_STRUCTURE_SEED,
};
pub use experiment::{
    mean_and_se, phi1_overlay, reference_phi1, run_experiment, write_series_csv, write_summary_csv, ExperimentConfig,
    ExperimentResult, MetricSummary, ReplicateRecord, Scenario,
};
pub use methods::{choose_k, predict_with, run_method, MethodFit, MethodId, PipelineConfig};
pub use metrics::{accuracy, alignment, frobenius_sse, mse, sse, surface_metrics, SurfaceMetrics};
pub use pace::{fit_pace, PaceConfig};
