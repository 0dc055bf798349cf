//! Spectral extraction of EDR directions from `Λ̂ₙ`.
//!
//! `η̂ₖ` are the eigenvectors of `Λ̂ₙ` in descending eigenvalue order and
//! the direction estimates are `β̂ₖ = Σ̂ₙ^{-1/2} η̂ₖ`, left unnormalized.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::LambdaEstimate;
use crate::sample::Sample;
use crate::summation::NeumaierSum;

/// Relative eigengap below which a warning is attached to an [`EdrBasis`].
pub const EIGENGAP_WARNING_RATIO: f64 = 1e-6;

/// `Σ̂ₙ = (1/n) Σᵢ (Xᵢ − X̄)(Xᵢ − X̄)ᵀ` and `X̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub mean: DVector<f64>,
}

/// Eigenvalues sorted descending with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    /// Column `k` pairs with `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Two consecutive eigenvalues closer than `1e-6·λ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigengapWarning {
    /// Zero-based index `k`; the gap is `λₖ − λₖ₊₁`.
    pub index: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdrBasis {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors `η̂ₖ` as columns.
    pub eta: DMatrix<f64>,
    /// `d × N` matrix of `β̂ₖ = Σ̂^{-1/2} η̂ₖ`.
    pub beta: DMatrix<f64>,
    pub n_directions: usize,
    pub eigengap_warnings: Vec<EigengapWarning>,
}

pub fn empirical_covariance(sample: &Sample) -> CovarianceEstimate {
    let n = sample.n() as f64;
    let d = sample.d();
    let x = sample.x();
    let mean = DVector::from_iterator(
        d,
        (0..d).map(|j| x.column(j).iter().copied().collect::<NeumaierSum>().total() / n),
    );
    let mut matrix = DMatrix::zeros(d, d);
    for k in 0..d {
        for l in 0..=k {
            let acc: NeumaierSum = x
                .row_iter()
                .map(|row| (row[k] - mean[k]) * (row[l] - mean[l]))
                .collect();
            let v = acc.total() / n;
            matrix[(k, l)] = v;
            matrix[(l, k)] = v;
        }
    }
    CovarianceEstimate { matrix, mean }
}

/// Symmetric eigendecomposition of `(m + mᵀ)/2`, eigenvalues descending.
///
/// Ties keep the solver's order. Each eigenvector is signed so that its
/// entry of largest magnitude (first such entry on ties) is nonnegative.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> SortedEigen {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            })
            .0;
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    SortedEigen { values, vectors }
}

/// Default floor for [`inverse_sqrt`] applied to a covariance:
/// `1e-8·trace/d`, never below the smallest positive normal.
pub fn default_min_eig_floor(m: &DMatrix<f64>) -> f64 {
    (1e-8 * m.trace() / m.nrows() as f64).max(f64::MIN_POSITIVE)
}

/// `V diag(λ^{-1/2}) Vᵀ` for a symmetric positive-definite `m`.
pub fn inverse_sqrt(m: &DMatrix<f64>, min_eig_floor: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "inverse_sqrt needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let eig = sorted_symmetric_eigen(m);
    let smallest = eig.values[eig.values.len() - 1];
    if !(smallest >= min_eig_floor) {
        return Err(Error::Singular {
            eigenvalue: smallest,
            floor: min_eig_floor,
        });
    }
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, k| {
        eig.vectors[(i, k)] / eig.values[k].sqrt()
    });
    let out = &scaled * eig.vectors.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

/// Eigenvectors of `Λ̂ₙ` and the whitened directions `β̂₁..β̂_N`.
pub fn edr_basis(
    lambda: &LambdaEstimate,
    cov: &CovarianceEstimate,
    n_directions: usize,
) -> Result<EdrBasis> {
    let d = lambda.matrix.nrows();
    if n_directions == 0 || n_directions > d {
        return Err(Error::DirectionsOutOfRange {
            requested: n_directions,
            dim: d,
        });
    }
    if cov.matrix.nrows() != d {
        return Err(Error::ShapeMismatch(format!(
            "Λ̂ is {d}x{d} but Σ̂ is {}x{}",
            cov.matrix.nrows(),
            cov.matrix.ncols()
        )));
    }
    let whitening = inverse_sqrt(&cov.matrix, default_min_eig_floor(&cov.matrix))?;
    let eig = sorted_symmetric_eigen(&lambda.matrix);
    let beta = &whitening * eig.vectors.columns(0, n_directions);
    let eigengap_warnings = eigengap_warnings(&eig.values);
    Ok(EdrBasis {
        eigenvalues: eig.values,
        eta: eig.vectors,
        beta,
        n_directions,
        eigengap_warnings,
    })
}

fn eigengap_warnings(values: &DVector<f64>) -> Vec<EigengapWarning> {
    let threshold = EIGENGAP_WARNING_RATIO * values[0];
    (0..values.len().saturating_sub(1))
        .filter_map(|k| {
            let gap = values[k] - values[k + 1];
            (gap < threshold).then_some(EigengapWarning { index: k, gap })
        })
        .collect()
}

/// `‖P₁ − P₂‖_F / √(2k)` for the orthogonal projectors onto the column
/// spaces of two `d × k` matrices. 0 for equal spans, 1 for orthogonal ones.
pub fn subspace_distance(b1: &DMatrix<f64>, b2: &DMatrix<f64>) -> Result<f64> {
    if b1.shape() != b2.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            b1.nrows(),
            b1.ncols(),
            b2.nrows(),
            b2.ncols()
        )));
    }
    let k = b1.ncols();
    let p1 = projector(b1)?;
    let p2 = projector(b2)?;
    Ok(((p1 - p2).norm() / (2.0 * k as f64).sqrt()).min(1.0))
}

/// Orthogonal projector onto the column space of a full-column-rank matrix.
pub fn projector(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = b.shape();
    if cols == 0 || cols > rows {
        return Err(Error::RankDeficient { rows, cols });
    }
    let svd = b.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-10 * smax {
        return Err(Error::RankDeficient { rows, cols });
    }
    let u = svd.u.expect("requested U");
    Ok(&u * u.transpose())
}

/// Spectral norm `sup ‖Ax‖/‖x‖` of a symmetric matrix: its largest
/// absolute eigenvalue. Distinct from the entrywise sup-norm of `vech`.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    sorted_symmetric_eigen(m).values.amax()
}
