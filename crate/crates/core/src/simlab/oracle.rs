//! Brute-force reference value of `Λ = Cov(E[X | Y])` for a synthetic model.
//!
//! A large sample is sorted by `Y` and cut into equal-count bins; the bin
//! means of `X` stand in for `E[X | Y]`. The count-weighted covariance of
//! the bin means is corrected for the `(B − 1)/n · W` inflation caused by
//! sampling noise in the bin means (`W` the pooled within-bin covariance)
//! and projected onto the PSD cone. Nothing here goes through the kernel
//! estimator.

use nalgebra::{DMatrix, DVector};

use super::model::SyntheticModel;
use crate::error::{Error, Result};
use crate::spectral::sorted_symmetric_eigen;

pub const MIN_ORACLE_N: usize = 100_000;
pub const MIN_ORACLE_BINS: usize = 50;
const MAX_DEFAULT_BINS: usize = 500;

/// `⌈oracle_n^{1/3}⌉` capped at 500 and floored at the minimum bin count.
pub fn default_oracle_bins(oracle_n: usize) -> usize {
    let mut bins = (oracle_n as f64).cbrt().round() as usize;
    while bins.pow(3) < oracle_n {
        bins += 1;
    }
    bins.clamp(MIN_ORACLE_BINS, MAX_DEFAULT_BINS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTruth {
    pub lambda_true: DMatrix<f64>,
    pub method: String,
    pub oracle_n: usize,
    pub n_bins: usize,
    /// Sup-norm Monte Carlo standard-error bound: half the largest entrywise
    /// disagreement between the two independent halves of the draw.
    pub se_estimate: f64,
}

impl OracleTruth {
    /// Eigenvalues of `Λ`, descending.
    pub fn eigenvalues(&self) -> DVector<f64> {
        sorted_symmetric_eigen(&self.lambda_true).values
    }

    /// `λ₁ < 3·SE`: no direction is distinguishable from Monte Carlo noise.
    pub fn is_degenerate(&self) -> bool {
        self.eigenvalues()[0] < 3.0 * self.se_estimate
    }
}

pub fn oracle_lambda(
    model: &SyntheticModel,
    oracle_n: usize,
    n_bins: usize,
    seed: u64,
) -> Result<OracleTruth> {
    if oracle_n < MIN_ORACLE_N {
        return Err(Error::InvalidPlan(format!(
            "oracle_n = {oracle_n} is below the minimum {MIN_ORACLE_N}"
        )));
    }
    if n_bins < MIN_ORACLE_BINS {
        return Err(Error::InvalidPlan(format!(
            "n_bins = {n_bins} is below the minimum {MIN_ORACLE_BINS}"
        )));
    }
    let (y, x) = model.draw(seed, oracle_n);
    let all: Vec<usize> = (0..oracle_n).collect();
    let half = oracle_n / 2;
    let lambda_true = binned_lambda(&y, &x, &all, n_bins);
    let first = binned_lambda(&y, &x, &all[..half], n_bins);
    let second = binned_lambda(&y, &x, &all[half..], n_bins);
    let se_estimate = 0.5 * (first - second).amax();
    Ok(OracleTruth {
        lambda_true,
        method: format!(
            "equal-count binning of Y into {n_bins} bins over {oracle_n} draws; \
             count-weighted covariance of bin means of X, debiased by (B-1)/n times the \
             pooled within-bin covariance and projected onto the PSD cone; \
             SE from a split-half repeat"
        ),
        oracle_n,
        n_bins,
        se_estimate,
    })
}

fn binned_lambda(y: &[f64], x: &DMatrix<f64>, rows: &[usize], n_bins: usize) -> DMatrix<f64> {
    let d = x.ncols();
    let n = rows.len();
    let mut order = rows.to_vec();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));

    let mut overall = DVector::<f64>::zeros(d);
    for &i in &order {
        overall += x.row(i).transpose();
    }
    overall /= n as f64;

    let mut between = DMatrix::<f64>::zeros(d, d);
    let mut within = DMatrix::<f64>::zeros(d, d);
    for b in 0..n_bins {
        let bin = &order[b * n / n_bins..(b + 1) * n / n_bins];
        if bin.is_empty() {
            continue;
        }
        let mut mean = DVector::<f64>::zeros(d);
        for &i in bin {
            mean += x.row(i).transpose();
        }
        mean /= bin.len() as f64;
        let dev = &mean - &overall;
        between += (&dev * dev.transpose()) * (bin.len() as f64 / n as f64);
        for &i in bin {
            let r = x.row(i).transpose() - &mean;
            within += &r * r.transpose();
        }
    }
    within /= (n - n_bins) as f64;
    let debiased = between - within * ((n_bins - 1) as f64 / n as f64);

    let eig = sorted_symmetric_eigen(&debiased);
    let clipped = eig.values.map(|v| v.max(0.0));
    let out = &eig.vectors * DMatrix::from_diagonal(&clipped) * eig.vectors.transpose();
    (&out + out.transpose()) * 0.5
}
