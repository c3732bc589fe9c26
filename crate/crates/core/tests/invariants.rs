use proptest::prelude::*;

use overdemod::capacity::rate_result;
use overdemod::fisher::{first_moment, second_moment};
use overdemod::frontend::{DemodConfig, SnapshotModel};
use overdemod::specfun::{binary_entropy, bvn_cdf, q_function, BvnSpec};
use nalgebra::{SymmetricEigen, Vector2};

proptest! {
    #[test]
    fn bvn_is_symmetric_in_its_arguments(h in -4.0..4.0f64, k in -4.0..4.0f64, rho in -0.999..0.999f64) {
        let a = bvn_cdf(BvnSpec::new(h, k, rho)).unwrap();
        let b = bvn_cdf(BvnSpec::new(k, h, rho)).unwrap();
        prop_assert!((a - b).abs() <= 1e-14);
    }

    #[test]
    fn bvn_respects_frechet_bounds(h in -4.0..4.0f64, k in -4.0..4.0f64, rho in -0.999..0.999f64) {
        let p = bvn_cdf(BvnSpec::new(h, k, rho)).unwrap();
        let (ph, pk) = (q_function(-h), q_function(-k));
        prop_assert!(p <= ph.min(pk) + 1e-14);
        prop_assert!(p >= (ph + pk - 1.0).max(0.0) - 1e-14);
    }

    #[test]
    fn bvn_grows_with_limits_and_correlation(h in -3.0..3.0f64, k in -3.0..3.0f64, rho in -0.95..0.95f64, d in 0.01..1.0f64) {
        let base = bvn_cdf(BvnSpec::new(h, k, rho)).unwrap();
        prop_assert!(bvn_cdf(BvnSpec::new(h + d, k, rho)).unwrap() >= base - 1e-15);
        prop_assert!(bvn_cdf(BvnSpec::new(h, k + d, rho)).unwrap() >= base - 1e-15);
        prop_assert!(bvn_cdf(BvnSpec::new(h, k, (rho + 0.04).min(0.999))).unwrap() >= base - 1e-15);
    }

    #[test]
    fn entropy_is_concave(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let mid = binary_entropy(0.5 * (a + b)).unwrap();
        let avg = 0.5 * (binary_entropy(a).unwrap() + binary_entropy(b).unwrap());
        prop_assert!(mid >= avg - 1e-15);
        prop_assert!((binary_entropy(a).unwrap() - binary_entropy(1.0 - a).unwrap()).abs() <= 1e-14);
    }

    #[test]
    fn sign_covariance_is_psd(m in 2usize..10, phase in -3.0..3.0f64, x1 in -1.5..1.5f64, x2 in -1.5..1.5f64, gain in 0.0..5.0f64) {
        let config = DemodConfig::equally_spaced(m).unwrap();
        let snap = SnapshotModel::from_pilot(&config, phase, Vector2::new(x1, x2), Vector2::zeros());
        let mu = first_moment(&snap, &config, gain).unwrap();
        let r = second_moment(&snap, &config, gain).unwrap();
        prop_assert!(mu.iter().all(|v| v.abs() <= 1.0));
        let eig = SymmetricEigen::new(r).eigenvalues;
        prop_assert!(eig.min() >= -1e-12, "{}", eig.min());
    }

    #[test]
    fn rate_bound_is_bounded_by_output_alphabet(m in 2usize..12, phase in -3.0..3.0f64, snr_db in -30.0..20.0f64) {
        let r = rate_result(m, phase, 10f64.powf(snr_db / 10.0)).unwrap();
        // M sign bits take at most 2M values over the latent plane
        prop_assert!(r.rate_lb >= 0.0 && r.rate_lb <= (2.0 * m as f64).log2());
        prop_assert!(r.capacity_m2 > 0.0 && r.capacity_m2 <= 2.0);
    }
}
