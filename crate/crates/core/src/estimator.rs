//! Kernel estimate of `Λ = Cov(E[X | Y])`.
//!
//! For bandwidth `h` and truncation level `b`:
//!
//! ```text
//! f̂(y)    = (1/(n h)) Σᵢ K((y − Yᵢ)/h)
//! ĝⱼ(y)   = (1/(n h)) Σᵢ Xᵢⱼ K((y − Yᵢ)/h)
//! f̂_b(y)  = max(f̂(y), b)
//! R̂ⱼ(y)   = ĝⱼ(y) / f̂_b(y)
//! Λ̂       = (1/n) Σᵢ R̂(Yᵢ) R̂(Yᵢ)ᵀ
//! ```
//!
//! with `h = s·n^{-c₁}` and `b = min(a, n^{-c₂})`. The evaluation points of
//! `Λ̂` are the sample's own responses and the self term is kept.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{build_order_r_kernel, KernelSpec};
use crate::sample::Sample;
use crate::summation::NeumaierSum;

pub const DEFAULT_C1: f64 = 0.13;
pub const DEFAULT_C2: f64 = 0.01;
pub const DEFAULT_A_CAP: f64 = 0.05;
pub const DEFAULT_KERNEL_ORDER: i64 = 8;

/// The inequalities checked by [`EstimatorConfig::new`], quoted in errors.
pub mod constraints {
    pub const C1_POSITIVE: &str = "c₁>0";
    pub const C2_RANGE: &str = "0<c₂<1/10";
    pub const C1_LOWER: &str = "1/8+c₂/4<c₁";
    pub const C1_UPPER: &str = "c₁<1/4−c₂";
    pub const A_CAP_POSITIVE: &str = "a>0";
    pub const SCALE_POSITIVE: &str = "bandwidth scale > 0";
}

/// Bandwidth and truncation schedule plus the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    c1: f64,
    c2: f64,
    a_cap: f64,
    bandwidth_scale: f64,
    kernel: KernelSpec,
}

impl EstimatorConfig {
    /// Validates `c₁ > 0`, `0 < c₂ < 1/10`, `1/8 + c₂/4 < c₁ < 1/4 − c₂` and
    /// `a > 0`.
    pub fn new(c1: f64, c2: f64, a_cap: f64, kernel: KernelSpec) -> Result<Self> {
        use constraints::*;
        let fail = |constraint, detail: String| Err(Error::InvalidConfig { constraint, detail });
        if !(c1 > 0.0) {
            return fail(C1_POSITIVE, format!("c1 = {c1}"));
        }
        if !(c2 > 0.0 && c2 < 0.1) {
            return fail(C2_RANGE, format!("c2 = {c2}"));
        }
        if !(0.125 + c2 / 4.0 < c1) {
            return fail(C1_LOWER, format!("c1 = {c1}, c2 = {c2}"));
        }
        if !(c1 < 0.25 - c2) {
            return fail(C1_UPPER, format!("c1 = {c1}, c2 = {c2}"));
        }
        if !(a_cap > 0.0 && a_cap.is_finite()) {
            return fail(A_CAP_POSITIVE, format!("a = {a_cap}"));
        }
        Ok(Self {
            c1,
            c2,
            a_cap,
            bandwidth_scale: 1.0,
            kernel,
        })
    }

    /// Sets the proportionality constant `s` in `h = s·n^{-c₁}`.
    pub fn with_bandwidth_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig {
                constraint: constraints::SCALE_POSITIVE,
                detail: format!("scale = {scale}"),
            });
        }
        self.bandwidth_scale = scale;
        Ok(self)
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn a_cap(&self) -> f64 {
        self.a_cap
    }

    pub fn bandwidth_scale(&self) -> f64 {
        self.bandwidth_scale
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// The fluctuation rate exponent `ν = 1/2 − 2(c₁ + c₂)`.
    pub fn rate_exponent(&self) -> f64 {
        0.5 - 2.0 * (self.c1 + self.c2)
    }

    /// `(h, b)` for sample size `n`.
    pub fn bandwidths(&self, n: usize) -> Bandwidths {
        let n = n.max(1) as f64;
        Bandwidths {
            h: self.bandwidth_scale * n.powf(-self.c1),
            b: self.a_cap.min(n.powf(-self.c2)),
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let kernel = build_order_r_kernel(DEFAULT_KERNEL_ORDER).expect("default order is valid");
        Self::new(DEFAULT_C1, DEFAULT_C2, DEFAULT_A_CAP, kernel).expect("defaults are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub h: f64,
    pub b: f64,
}

/// `R̂_b(y)` at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioVector {
    pub values: DVector<f64>,
    pub at: f64,
}

/// `Λ̂ₙ` together with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEstimate {
    pub matrix: DMatrix<f64>,
    pub n: usize,
    pub h: f64,
    pub b: f64,
    /// Fraction of sample points where `f̂(Yᵢ) < b`.
    pub truncation_frequency: f64,
}

/// `f̂(y)`. May be negative for kernels of order ≥ 2.
pub fn estimate_density(sample: &Sample, kernel: &KernelSpec, h: f64, y: f64) -> f64 {
    let acc: NeumaierSum = sample
        .y()
        .iter()
        .map(|&yi| kernel.evaluate((y - yi) / h))
        .collect();
    acc.total() / (sample.n() as f64 * h)
}

/// `ĝⱼ(y)` for zero-based coordinate `j`.
pub fn estimate_g(sample: &Sample, kernel: &KernelSpec, h: f64, j: usize, y: f64) -> Result<f64> {
    if j >= sample.d() {
        return Err(Error::IndexOutOfRange {
            index: j,
            dim: sample.d(),
        });
    }
    let col = sample.x().column(j);
    let acc: NeumaierSum = sample
        .y()
        .iter()
        .zip(col.iter())
        .map(|(&yi, &xij)| xij * kernel.evaluate((y - yi) / h))
        .collect();
    Ok(acc.total() / (sample.n() as f64 * h))
}

/// `f̂_b(y) = max(f̂(y), b)`.
pub fn truncated_density(sample: &Sample, kernel: &KernelSpec, h: f64, b: f64, y: f64) -> f64 {
    estimate_density(sample, kernel, h, y).max(b)
}

/// `R̂_b(y)` with `(h, b)` taken from `config` at the sample's size.
pub fn ratio_vector(sample: &Sample, config: &EstimatorConfig, y: f64) -> RatioVector {
    let Bandwidths { h, b } = config.bandwidths(sample.n());
    let kernel = config.kernel();
    let denom = truncated_density(sample, kernel, h, b, y);
    let values = DVector::from_iterator(
        sample.d(),
        (0..sample.d()).map(|j| estimate_g(sample, kernel, h, j, y).expect("j < d") / denom),
    );
    RatioVector { values, at: y }
}

/// Sample reordered by response so that the kernel window around any
/// point is a contiguous range.
struct SortedSample {
    y: Vec<f64>,
    /// Row-major predictors in the same order as `y`.
    x: Vec<f64>,
    d: usize,
}

impl SortedSample {
    fn new(sample: &Sample) -> Self {
        let mut order: Vec<usize> = (0..sample.n()).collect();
        order.sort_by(|&a, &b| sample.y()[a].total_cmp(&sample.y()[b]).then(a.cmp(&b)));
        let d = sample.d();
        let y = order.iter().map(|&i| sample.y()[i]).collect();
        let mut x = Vec::with_capacity(order.len() * d);
        for &i in &order {
            x.extend(sample.x().row(i).iter());
        }
        Self { y, x, d }
    }

    /// Returns `(f̂(y), ĝ(y))` writing `ĝ` into `g`.
    fn kernel_sums(&self, kernel: &KernelSpec, h: f64, y: f64, g: &mut [f64]) -> f64 {
        let reach = h * (1.0 + 1e-9);
        let lo = self.y.partition_point(|&v| v < y - reach);
        let hi = self.y.partition_point(|&v| v <= y + reach);
        let mut f_acc = NeumaierSum::new();
        let mut g_acc = vec![NeumaierSum::new(); self.d];
        for i in lo..hi {
            let k = kernel.evaluate((y - self.y[i]) / h);
            if k == 0.0 {
                continue;
            }
            f_acc.add(k);
            let row = &self.x[i * self.d..(i + 1) * self.d];
            for (acc, &xij) in g_acc.iter_mut().zip(row) {
                acc.add(xij * k);
            }
        }
        let scale = 1.0 / (self.y.len() as f64 * h);
        for (out, acc) in g.iter_mut().zip(&g_acc) {
            *out = acc.total() * scale;
        }
        f_acc.total() * scale
    }
}

/// `Λ̂ₙ = (1/n) Σᵢ R̂_b(Yᵢ) R̂_b(Yᵢ)ᵀ`.
///
/// Ratio vectors are computed in parallel; the reduction runs in sample
/// order, so the result does not depend on the thread count.
pub fn estimate_lambda(sample: &Sample, config: &EstimatorConfig) -> LambdaEstimate {
    let n = sample.n();
    let d = sample.d();
    let Bandwidths { h, b } = config.bandwidths(n);
    let sorted = SortedSample::new(sample);
    let kernel = config.kernel();

    let ratios: Vec<(Vec<f64>, bool)> = sample
        .y()
        .par_iter()
        .map(|&yi| {
            let mut g = vec![0.0; d];
            let f = sorted.kernel_sums(kernel, h, yi, &mut g);
            let denom = f.max(b);
            g.iter_mut().for_each(|v| *v /= denom);
            (g, f < b)
        })
        .collect();

    let truncated = ratios.iter().filter(|(_, t)| *t).count();
    let mut matrix = DMatrix::zeros(d, d);
    for k in 0..d {
        for l in 0..=k {
            let acc: NeumaierSum = ratios.iter().map(|(v, _)| v[k] * v[l]).collect();
            let value = acc.total() / n as f64;
            matrix[(k, l)] = value;
            matrix[(l, k)] = value;
        }
    }
    LambdaEstimate {
        matrix,
        n,
        h,
        b,
        truncation_frequency: truncated as f64 / n as f64,
    }
}

/// Stacks the lower triangle column by column:
/// `(a₁₁, …, a_d1, a₂₂, …, a_d2, …, a_dd)`.
pub fn vech(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "vech needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let d = m.nrows();
    let mut asym = 0.0f64;
    for k in 0..d {
        for l in 0..k {
            asym = asym.max((m[(k, l)] - m[(l, k)]).abs());
        }
    }
    if asym > 1e-10 {
        return Err(Error::NotSymmetric(asym));
    }
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for col in 0..d {
        for row in col..d {
            out.push(m[(row, col)]);
        }
    }
    Ok(DVector::from_vec(out))
}

/// `max |vᵢ|`.
pub fn sup_norm(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyVector);
    }
    Ok(v.iter().fold(0.0, |m, x| m.max(x.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn epan() -> KernelSpec {
        KernelSpec::epanechnikov()
    }

    #[test]
    fn bandwidth_schedule() {
        let config = EstimatorConfig::default();
        let bw = config.bandwidths(1);
        assert_eq!(bw.h, 1.0);
        assert_eq!(bw.b, 0.05);
        let bw = config.bandwidths(10_000);
        assert!((bw.h - 0.30199517204020).abs() < 1e-12);
        assert_eq!(bw.b, 0.05);
        assert!((config.rate_exponent() - 0.22).abs() < 1e-15);
    }

    #[test]
    fn truncation_cap_gives_way_to_power_law() {
        let config = EstimatorConfig::new(0.13, 0.01, 0.95, epan()).unwrap();
        let bw = config.bandwidths(10_000);
        assert!((bw.b - 10_000f64.powf(-0.01)).abs() < 1e-15);
    }

    #[test]
    fn config_validation_quotes_inequalities() {
        let err = |c1, c2, a| match EstimatorConfig::new(c1, c2, a, epan()) {
            Err(Error::InvalidConfig { constraint, .. }) => constraint,
            other => panic!("expected error, got {other:?}"),
        };
        assert_eq!(err(0.13, 0.2, 0.05), "0<c₂<1/10");
        assert_eq!(err(0.13, 0.0, 0.05), "0<c₂<1/10");
        assert_eq!(err(0.0, 0.01, 0.05), "c₁>0");
        assert_eq!(err(0.127, 0.01, 0.05), "1/8+c₂/4<c₁");
        assert_eq!(err(0.245, 0.01, 0.05), "c₁<1/4−c₂");
        assert_eq!(err(0.13, 0.01, 0.0), "a>0");
        assert!(EstimatorConfig::default()
            .with_bandwidth_scale(-1.0)
            .is_err());
    }

    #[test]
    fn density_hand_cases() {
        let k = epan();
        let s = Sample::from_rows(vec![0.3], &[vec![1.0]]).unwrap();
        assert_eq!(estimate_density(&s, &k, 0.5, 0.3), 0.75 / 0.5);
        assert_eq!(estimate_density(&s, &k, 0.5, 2.0), 0.0);

        let s = Sample::from_rows(vec![0.0, 0.5, 1.0], &[vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        assert!((estimate_density(&s, &k, 1.0, 0.5) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn g_hand_cases() {
        let k = epan();
        let s = Sample::from_rows(vec![0.0, 1.0], &[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert!((estimate_g(&s, &k, 1.0, 0, 0.0).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(estimate_g(&s, &k, 1.0, 1, 0.3).unwrap(), 0.0);
        assert_eq!(
            estimate_g(&s, &k, 1.0, 2, 0.0),
            Err(Error::IndexOutOfRange { index: 2, dim: 2 })
        );

        let ones =
            Sample::from_rows(vec![0.0, 0.4, 1.1], &[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        for y in [-0.5, 0.2, 0.9] {
            assert_eq!(
                estimate_g(&ones, &k, 0.7, 0, y).unwrap(),
                estimate_density(&ones, &k, 0.7, y)
            );
        }
    }

    #[test]
    fn truncation_floor() {
        let k = build_order_r_kernel(8).unwrap();
        let s = Sample::from_rows(vec![0.0], &[vec![1.0]]).unwrap();
        // Find a point inside the negative lobe.
        let y = (1..1000)
            .map(|i| i as f64 / 1000.0)
            .find(|&y| estimate_density(&s, &k, 1.0, y) < 0.0)
            .unwrap();
        assert_eq!(truncated_density(&s, &k, 1.0, 0.05, y), 0.05);
        assert_eq!(truncated_density(&s, &k, 1.0, 0.05, 0.0), k.evaluate(0.0));
    }

    #[test]
    fn single_point_ratio_cancels() {
        let config = EstimatorConfig::default();
        let s = Sample::from_rows(vec![0.7], &[vec![0.25, -1.5, 3.0]]).unwrap();
        let r = ratio_vector(&s, &config, 0.7);
        assert_eq!(r.at, 0.7);
        assert_eq!(r.values.as_slice(), &[0.25, -1.5, 3.0]);

        let lam = estimate_lambda(&s, &config);
        let v = DVector::from_vec(vec![0.25, -1.5, 3.0]);
        assert_eq!(lam.matrix, &v * v.transpose());
        assert_eq!(lam.matrix.trace(), v.norm_squared());
        assert_eq!((lam.n, lam.h, lam.b), (1, 1.0, 0.05));
    }

    #[test]
    fn zero_predictors_give_zero_lambda() {
        let config = EstimatorConfig::default();
        let s = Sample::from_rows(
            vec![0.0, 0.1, 0.5],
            &[vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]],
        )
        .unwrap();
        assert_eq!(ratio_vector(&s, &config, 0.2).values, DVector::zeros(2));
        assert_eq!(estimate_lambda(&s, &config).matrix, DMatrix::zeros(2, 2));
    }

    #[test]
    fn vech_ordering() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(vech(&m).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(
            vech(&DMatrix::identity(3, 3)).unwrap().as_slice(),
            &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]
        );
        let m = DMatrix::from_fn(3, 3, |k, l| {
            let (hi, lo) = if k >= l { (k, l) } else { (l, k) };
            (10 * (hi + 1) + lo + 1) as f64
        });
        assert_eq!(
            vech(&m).unwrap().as_slice(),
            &[11.0, 21.0, 31.0, 22.0, 32.0, 33.0]
        );
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 3.0]);
        assert!(matches!(vech(&bad), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn sup_norm_cases() {
        assert_eq!(sup_norm(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(sup_norm(&[1.0, -3.0, 2.0]).unwrap(), 3.0);
        assert_eq!(sup_norm(&[]), Err(Error::EmptyVector));
    }
}
