//! The estimator against a literal double-loop transcription of the
//! density / numerator / truncated-ratio / outer-product formulas.

use edr_core::simlab::{generate, Link, SyntheticModel};
use edr_core::{
    build_order_r_kernel, estimate_density, estimate_g, estimate_lambda, ratio_vector,
    truncated_density, EstimatorConfig, KernelSpec, Sample,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

/// Plain-loop Λ̂ₙ with no windowing, sorting or compensated summation.
fn naive_lambda(y: &[f64], x: &[Vec<f64>], kernel: &KernelSpec, h: f64, b: f64) -> Vec<Vec<f64>> {
    let n = y.len();
    let d = x[0].len();
    let mut r = vec![vec![0.0; d]; n];
    for i in 0..n {
        let mut f = 0.0;
        for l in 0..n {
            f += kernel.evaluate((y[i] - y[l]) / h) / h;
        }
        f /= n as f64;
        let denom = if f > b { f } else { b };
        for j in 0..d {
            let mut g = 0.0;
            for l in 0..n {
                g += x[l][j] * kernel.evaluate((y[i] - y[l]) / h) / h;
            }
            g /= n as f64;
            r[i][j] = g / denom;
        }
    }
    let mut lam = vec![vec![0.0; d]; d];
    for k in 0..d {
        for l in 0..d {
            let mut s = 0.0;
            for ri in &r {
                s += ri[k] * ri[l];
            }
            lam[k][l] = s / n as f64;
        }
    }
    lam
}

fn rows(sample: &Sample) -> Vec<Vec<f64>> {
    sample
        .x()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

fn max_diff(a: &DMatrix<f64>, b: &[Vec<f64>]) -> f64 {
    let mut m = 0.0f64;
    for (k, row) in b.iter().enumerate() {
        for (l, v) in row.iter().enumerate() {
            m = m.max((a[(k, l)] - v).abs());
        }
    }
    m
}

#[test]
fn ratio_vector_matches_scalar_transcription() {
    // n = 5, d = 2, hand-chosen values; bandwidth forced through the scale.
    let y = vec![-0.4, 0.0, 0.15, 0.6, 1.3];
    let x = vec![
        vec![1.0, -0.5],
        vec![0.2, 0.3],
        vec![-0.7, 1.1],
        vec![0.4, 0.0],
        vec![-1.2, -0.9],
    ];
    let sample = Sample::from_rows(y.clone(), &x).unwrap();
    let kernel = KernelSpec::epanechnikov();
    let config = EstimatorConfig::new(0.13, 0.01, 0.05, kernel.clone())
        .unwrap()
        .with_bandwidth_scale(0.9 * 5f64.powf(0.13))
        .unwrap();
    let h = config.bandwidths(5).h;
    assert!((h - 0.9).abs() < 1e-15);
    for &at in &[-0.4, 0.1, 0.6, 2.5] {
        let mut f = 0.0;
        let mut g = [0.0; 2];
        for i in 0..5 {
            let u = (at - y[i]) / h;
            let k = if u.abs() <= 1.0 {
                0.75 * (1.0 - u * u)
            } else {
                0.0
            };
            f += k;
            g[0] += x[i][0] * k;
            g[1] += x[i][1] * k;
        }
        let f = (f / (5.0 * h)).max(0.05);
        let expected = [g[0] / (5.0 * h) / f, g[1] / (5.0 * h) / f];
        let got = ratio_vector(&sample, &config, at);
        for (j, e) in expected.iter().enumerate() {
            assert!((got.values[j] - e).abs() < 1e-14, "y={at} j={j}");
        }
    }
}

#[test]
fn fifty_point_sample_matches_naive_loops() {
    let model = SyntheticModel::preset(Link::Linear, 3, 0.2).unwrap();
    let sample = generate(&model, 20240917, 50).unwrap();
    let config = EstimatorConfig::default();
    let bw = config.bandwidths(50);
    let est = estimate_lambda(&sample, &config);
    let naive = naive_lambda(sample.y(), &rows(&sample), config.kernel(), bw.h, bw.b);
    assert!(max_diff(&est.matrix, &naive) < 1e-12);
    assert_eq!((est.h, est.b), (bw.h, bw.b));
}

#[test]
fn exact_symmetry_of_lambda() {
    let model = SyntheticModel::preset(Link::Product, 5, 0.2).unwrap();
    let sample = generate(&model, 4, 300).unwrap();
    let m = estimate_lambda(&sample, &EstimatorConfig::default()).matrix;
    assert_eq!(m, m.transpose());
}

fn sample_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (1usize..=50, 1usize..=4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n),
        )
    })
}

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::epanechnikov()),
        (1i64..=5).prop_map(|h| build_order_r_kernel(2 * h).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_naive_oracle((y, x) in sample_strategy(), kernel in kernel_strategy(), scale in 0.2f64..3.0) {
        let sample = Sample::from_rows(y.clone(), &x).unwrap();
        let config = EstimatorConfig::new(0.13, 0.01, 0.05, kernel).unwrap().with_bandwidth_scale(scale).unwrap();
        let bw = config.bandwidths(y.len());
        let est = estimate_lambda(&sample, &config);
        let naive = naive_lambda(&y, &x, config.kernel(), bw.h, bw.b);
        let scale_ref = naive.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_diff(&est.matrix, &naive) <= 1e-12 * scale_ref);
    }

    #[test]
    fn symmetric_and_psd((y, x) in sample_strategy(), kernel in kernel_strategy()) {
        let sample = Sample::from_rows(y, &x).unwrap();
        let config = EstimatorConfig::new(0.13, 0.01, 0.05, kernel).unwrap();
        let m = estimate_lambda(&sample, &config).matrix;
        prop_assert_eq!(&m, &m.transpose());
        let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
        prop_assert!(min_eig >= -1e-10 * m.trace().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn truncation_floor_and_monotonicity((y, x) in sample_strategy(), kernel in kernel_strategy(), at in -3.0f64..3.0) {
        let sample = Sample::from_rows(y.clone(), &x).unwrap();
        let (h, b) = (0.7, 0.05);
        for point in y.iter().copied().chain(std::iter::once(at)) {
            let f = estimate_density(&sample, &kernel, h, point);
            let ft = truncated_density(&sample, &kernel, h, b, point);
            prop_assert!(ft >= b);
            prop_assert!(ft >= f);
            if f >= b {
                prop_assert_eq!(ft, f);
            }
        }
    }

    #[test]
    fn numerator_is_linear_under_translation(
        (y, x) in sample_strategy(),
        shift in prop::collection::vec(-5.0f64..5.0, 4),
        at in -2.5f64..2.5,
    ) {
        let kernel = build_order_r_kernel(8).unwrap();
        let h = 0.8;
        let d = x[0].len();
        let shifted: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&shift).map(|(a, c)| a + c).collect()).collect();
        let s0 = Sample::from_rows(y.clone(), &x).unwrap();
        let s1 = Sample::from_rows(y, &shifted).unwrap();
        let f = estimate_density(&s0, &kernel, h, at);
        for (j, c) in shift.iter().enumerate().take(d) {
            let g0 = estimate_g(&s0, &kernel, h, j, at).unwrap();
            let g1 = estimate_g(&s1, &kernel, h, j, at).unwrap();
            let scale = 1.0 + g0.abs() + (c * f).abs();
            prop_assert!((g1 - g0 - c * f).abs() <= 1e-12 * scale);
        }
    }
}
