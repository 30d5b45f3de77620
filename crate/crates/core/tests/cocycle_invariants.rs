use proptest::prelude::*;
use qplab::cocycle::*;
use qplab::model::{OperatorSpec, GOLDEN_MEAN};

fn amo(lambda: f64, theta: f64) -> OperatorSpec {
    OperatorSpec::almost_mathieu(lambda, GOLDEN_MEAN, theta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn products_stay_in_sl2(lambda in 0.0f64..20.0, e in -12.0f64..12.0, theta in 0.0f64..1.0, k in 1usize..3000) {
        let m = cocycle_product(&amo(lambda, theta), e, k).unwrap();
        prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
        prop_assert!(m.log_norm() >= 0.5 * 2f64.ln() - 1e-12); // ‖M‖_F ≥ √2 for det 1
    }

    #[test]
    fn log_norms_are_subadditive(lambda in 0.0f64..10.0, e in -6.0f64..6.0, theta in 0.0f64..1.0, m in 1usize..500, n in 1usize..500) {
        let spec = amo(lambda, theta);
        let whole = cocycle_product(&spec, e, m + n).unwrap().log_norm();
        let first = cocycle_product(&spec, e, m).unwrap().log_norm();
        let second = cocycle_product_from(&spec, e, m as i64, n).unwrap().log_norm();
        prop_assert!(whole <= first + second + 1e-9);
    }

    #[test]
    fn composition_matches_a_single_product(lambda in 0.0f64..5.0, e in -4.0f64..4.0, theta in 0.0f64..1.0, m in 1usize..200, n in 1usize..200) {
        let spec = amo(lambda, theta);
        let whole = cocycle_product(&spec, e, m + n).unwrap();
        let parts = CocycleProduct::compose(
            &cocycle_product_from(&spec, e, m as i64, n).unwrap(),
            &cocycle_product(&spec, e, m).unwrap(),
        );
        prop_assert!((whole.log_norm() - parts.log_norm()).abs() < 1e-9 * whole.log_norm().max(1.0));
    }
}

#[test]
fn empty_product_is_the_identity() {
    let m = cocycle_product(&amo(3.0, 0.2), 0.5, 0).unwrap();
    assert_eq!(m.to_matrix(), TransferMatrix::IDENTITY);
    assert_eq!(m.log_norm_accumulator(), 0.0);
}

#[test]
fn short_products_match_explicit_multiplication() {
    let spec = amo(2.3, 0.37);
    let v = qplab::model::potential_sequence(&spec, 0..6).unwrap();
    let mut explicit = TransferMatrix::IDENTITY;
    for row in &v {
        explicit = transfer_step(0.4, row[0]).mul(&explicit);
    }
    let m = cocycle_product(&spec, 0.4, 6).unwrap().to_matrix();
    for i in 0..2 {
        for j in 0..2 {
            assert!((m.0[i][j] - explicit.0[i][j]).abs() < 1e-12);
        }
    }
}

#[test]
fn constant_cocycle_oracle() {
    // ln((3 + √5)/2) = 0.96242365011920689… (30-digit arithmetic)
    let est = lyapunov_theta_avg(&amo(0.0, 0.0), 3.0, 1000, 8).unwrap();
    assert!((est.gamma - 0.962_423_650_119_206_9).abs() < 1e-3);
    assert!((constant_cocycle_exponent(3.0, 0.0) - 0.962_423_650_119_206_9).abs() < 1e-15);
    let long = lyapunov_orbit(&amo(0.0, 0.0), 3.0, 100_000).unwrap();
    assert!((long.gamma - 0.962_423_650_119_206_9).abs() < 1e-5);
}

#[test]
fn supercritical_exponent_matches_log_half_coupling() {
    // on the spectrum γ = ln(λ/2) for the almost Mathieu operator
    for (lambda, e) in [(4.0, 0.0), (10.0, 0.0), (10.0, 3.2)] {
        let est = lyapunov_extrapolated(&amo(lambda, 0.0), e, 2000, 32).unwrap();
        assert!(est.gamma >= (lambda / 2.0f64).ln() - 2e-3, "λ={lambda} E={e}: {}", est.gamma);
    }
    let est = lyapunov_extrapolated(&amo(4.0, 0.0), 0.0, 4000, 32).unwrap();
    assert!((est.gamma - 2f64.ln()).abs() < 5e-3, "{}", est.gamma);
}

#[test]
fn subcritical_exponent_vanishes_on_the_spectrum() {
    let est = lyapunov_theta_avg(&amo(1.0, 0.0), 0.0, 4000, 32).unwrap();
    assert!(est.gamma < 5e-3);
}

#[test]
fn diagonal_limit_has_no_cocycle() {
    let mut spec = amo(1.0, 0.0);
    spec.diagonal_limit = true;
    assert!(cocycle_product(&spec, 0.0, 10).is_err());
}

#[test]
fn curve_is_parallel_but_ordered() {
    let spec = amo(3.0, 0.1);
    let energies: Vec<f64> = (0..9).map(|i| -4.0 + i as f64).collect();
    let curve = lyapunov_curve(&spec, &energies, 300, 8).unwrap();
    for (c, e) in curve.iter().zip(&energies) {
        assert_eq!(c.energy, *e);
        assert_eq!(c.gamma, lyapunov_theta_avg(&spec, *e, 300, 8).unwrap().gamma);
    }
    assert!(lyapunov_curve(&spec, &[1.0, 0.0], 10, 4).is_err());
    assert!(lyapunov_curve(&spec, &[], 10, 4).is_err());
}
