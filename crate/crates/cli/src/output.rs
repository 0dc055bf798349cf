use std::io::Write;
use std::path::Path;

use edr_core::{matrix_rows as rows, CovarianceEstimate, EdrBasis, LambdaEstimate, Sample};
use serde::Serialize;

use crate::EstimatorFlags;

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so a failed run never leaves a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EstimateOutput {
    schema_version: u32,
    command: &'static str,
    input: String,
    config: ResolvedConfig,
    n: usize,
    d: usize,
    h: f64,
    b: f64,
    truncation_frequency: f64,
    max_predictor_norm: f64,
    lambda: Vec<Vec<f64>>,
    covariance: Vec<Vec<f64>>,
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// `eta[k]` is the eigenvector paired with `eigenvalues[k]`.
    eta: Vec<Vec<f64>>,
    /// `beta[k]` is the k-th whitened direction.
    beta: Vec<Vec<f64>>,
    eigengap_warnings: Vec<edr_core::spectral::EigengapWarning>,
}

#[derive(Debug, Serialize)]
struct ResolvedConfig {
    #[serde(flatten)]
    estimator: EstimatorFlags,
    n_directions: usize,
    rate_exponent: f64,
}

impl EstimateOutput {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        schema_version: u32,
        input: &Path,
        flags: &EstimatorFlags,
        n_directions: usize,
        sample: &Sample,
        lambda: &LambdaEstimate,
        cov: &CovarianceEstimate,
        basis: &EdrBasis,
    ) -> Self {
        Self {
            schema_version,
            command: "estimate",
            input: input.display().to_string(),
            config: ResolvedConfig {
                estimator: flags.clone(),
                n_directions,
                rate_exponent: 0.5 - 2.0 * (flags.c1 + flags.c2),
            },
            n: sample.n(),
            d: sample.d(),
            h: lambda.h,
            b: lambda.b,
            truncation_frequency: lambda.truncation_frequency,
            max_predictor_norm: sample.max_predictor_norm(),
            lambda: rows(&lambda.matrix),
            covariance: rows(&cov.matrix),
            mean: cov.mean.iter().copied().collect(),
            eigenvalues: basis.eigenvalues.iter().copied().collect(),
            eta: rows(&basis.eta.transpose()),
            beta: rows(&basis.beta.transpose()),
            eigengap_warnings: basis.eigengap_warnings.clone(),
        }
    }
}
