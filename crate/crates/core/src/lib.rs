//! Kernel estimation of `Λ = Cov(E[X | Y])` for the semiparametric model
//! `Y = F(β₁ᵀX, …, β_NᵀX, ε)` and extraction of the effective dimension
//! reduction (EDR) directions from its spectrum.
//!
//! * [`kernels`]: symmetric kernels on [-1, 1] with vanishing moments up to
//!   a chosen even order.
//! * [`estimator`]: the density, numerator, truncated-ratio and `Λ̂ₙ`
//!   estimates plus `vech` and the vector sup-norm.
//! * [`spectral`]: eigen-extraction, whitening and subspace distances.
//! * [`simlab`]: synthetic models, a binning oracle for `Λ` and Monte Carlo
//!   convergence experiments.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod kernels;
pub mod quadrature;
pub mod sample;
pub mod simlab;
pub mod spectral;
pub mod summation;

pub use error::{Error, Result};
pub use estimator::{
    estimate_density, estimate_g, estimate_lambda, ratio_vector, sup_norm, truncated_density, vech,
    Bandwidths, EstimatorConfig, LambdaEstimate, RatioVector,
};
pub use kernels::{build_order_r_kernel, kernel_moment, KernelSpec};
pub use sample::Sample;
pub use spectral::{
    edr_basis, empirical_covariance, inverse_sqrt, operator_norm, subspace_distance,
    CovarianceEstimate, EdrBasis,
};

/// Row-major nested copy of a matrix, for serialization.
pub fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
