use edr_core::simlab::{generate, sample_sphere_predictors, Link, SyntheticModel};
use edr_core::{
    edr_basis, empirical_covariance, estimate_lambda, inverse_sqrt, operator_norm,
    subspace_distance, EstimatorConfig, Sample,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

fn random_orthonormal(rng: &mut ChaCha8Rng, d: usize, k: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, k, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

#[test]
fn inverse_sqrt_multiplies_back_to_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in 1..=8 {
        let m = random_spd(&mut rng, d);
        let s = inverse_sqrt(&m, 1e-12).unwrap();
        let err = (&s * &m * &s - DMatrix::identity(d, d)).amax();
        assert!(err < 1e-8, "d={d}: {err:e}");
        assert!((&s - s.transpose()).amax() < 1e-12);
    }
}

#[test]
fn eigen_reconstruction_through_edr_basis() {
    let model = SyntheticModel::preset(Link::Product, 5, 0.2).unwrap();
    let sample = generate(&model, 99, 1500).unwrap();
    let lambda = estimate_lambda(&sample, &EstimatorConfig::default());
    let cov = empirical_covariance(&sample);
    let basis = edr_basis(&lambda, &cov, 5).unwrap();
    let eta = &basis.eta;
    let recon = eta * DMatrix::from_diagonal(&basis.eigenvalues) * eta.transpose();
    assert!((recon - &lambda.matrix).amax() < 1e-8);
    assert!((eta.transpose() * eta - DMatrix::identity(5, 5)).amax() < 1e-10);
    for w in basis.eigenvalues.as_slice().windows(2) {
        assert!(w[0] >= w[1]);
    }
}

#[test]
fn beta_is_whitened_eta() {
    let model = SyntheticModel::preset(Link::Linear, 4, 0.2).unwrap();
    let sample = generate(&model, 5, 800).unwrap();
    let lambda = estimate_lambda(&sample, &EstimatorConfig::default());
    let cov = empirical_covariance(&sample);
    let basis = edr_basis(&lambda, &cov, 2).unwrap();
    let s = inverse_sqrt(&cov.matrix, 1e-8 * cov.matrix.trace() / 4.0).unwrap();
    assert!((&s * basis.eta.columns(0, 2) - &basis.beta).amax() < 1e-12);
    assert_eq!(basis.beta.ncols(), 2);
}

#[test]
fn sphere_sample_covariance_is_near_identity() {
    let x = sample_sphere_predictors(3, 10_000, 4).unwrap();
    let sample = Sample::new(vec![0.0; 10_000], x).unwrap();
    let cov = empirical_covariance(&sample);
    assert!((cov.matrix - DMatrix::identity(4, 4)).amax() < 0.05);
    assert!(cov.mean.amax() < 0.05);
}

#[test]
fn basis_is_deterministic() {
    let model = SyntheticModel::preset(Link::Product, 4, 0.2).unwrap();
    let sample = generate(&model, 123, 1000).unwrap();
    let run = || {
        let lambda = estimate_lambda(&sample, &EstimatorConfig::default());
        edr_basis(&lambda, &empirical_covariance(&sample), 2).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.beta, b.beta);
    assert_eq!(a.eigenvalues, b.eigenvalues);
}

#[test]
fn operator_norm_of_diagonal() {
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -3.0, 2.0]));
    assert!((operator_norm(&m) - 3.0).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subspace_distance_is_a_pseudometric(seed in any::<u64>(), d in 2usize..7, k in 1usize..3) {
        prop_assume!(k < d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_orthonormal(&mut rng, d, k);
        let b = random_orthonormal(&mut rng, d, k);
        let c = random_orthonormal(&mut rng, d, k);
        let ab = subspace_distance(&a, &b).unwrap();
        let ba = subspace_distance(&b, &a).unwrap();
        let ac = subspace_distance(&a, &c).unwrap();
        let cb = subspace_distance(&c, &b).unwrap();
        prop_assert!(subspace_distance(&a, &a).unwrap() < 1e-7);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn subspace_distance_ignores_basis_choice(seed in any::<u64>(), d in 3usize..7, scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_orthonormal(&mut rng, d, 2);
        let b = random_orthonormal(&mut rng, d, 2);
        // A non-orthonormal basis spanning the same space as `a`.
        let mix = DMatrix::from_row_slice(2, 2, &[scale, 1.0, -0.5, 2.0]);
        let a2 = &a * mix;
        let d1 = subspace_distance(&a, &b).unwrap();
        let d2 = subspace_distance(&a2, &b).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-9);
    }

    #[test]
    fn top_direction_is_scale_invariant(seed in 0u64..1000, scale in 0.1f64..10.0) {
        let model = SyntheticModel::preset(Link::Linear, 3, 0.2).unwrap();
        let sample = generate(&model, seed, 200).unwrap();
        let config = EstimatorConfig::default();
        let lambda = estimate_lambda(&sample, &config);
        let mut scaled = lambda.clone();
        scaled.matrix *= scale;
        let cov = empirical_covariance(&sample);
        let b1 = edr_basis(&lambda, &cov, 1).unwrap();
        let b2 = edr_basis(&scaled, &cov, 1).unwrap();
        prop_assert!(subspace_distance(&b1.beta, &b2.beta).unwrap() < 1e-6);
    }
}
