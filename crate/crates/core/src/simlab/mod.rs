//! Synthetic models, a brute-force oracle for `Λ`, and Monte Carlo
//! convergence experiments for the kernel estimator.

mod convergence;
mod model;
mod oracle;
mod rng;
mod stats;

pub use convergence::{
    run_convergence, ConvergenceReport, ExperimentPlan, GridPointSummary, Quartiles,
    ReplicateRecord, SlopeFit, CSV_HEADER, REPORT_SCHEMA_VERSION,
};
pub use model::{generate, sample_sphere_predictors, Link, SyntheticModel};
pub use oracle::{default_oracle_bins, oracle_lambda, OracleTruth, MIN_ORACLE_BINS, MIN_ORACLE_N};
pub use rng::derive_seed;
