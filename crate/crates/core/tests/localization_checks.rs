use qplab::localization::*;
use qplab::model::{FourierPotential, Geometry, OperatorSpec, GOLDEN_MEAN};

fn amo(lambda: f64, theta: f64) -> OperatorSpec {
    OperatorSpec::almost_mathieu(lambda, GOLDEN_MEAN, theta).unwrap()
}

fn median_decay(report: &LocalizationReport) -> f64 {
    let rates: Vec<f64> = report.states.iter().filter(|s| s.localized).map(|s| s.profile.decay_rate).collect();
    median(&rates).unwrap()
}

#[test]
fn synthetic_exponential_profile_is_recovered() {
    let gamma = 0.7;
    let n = 401;
    let raw: Vec<f64> = (0..n).map(|i| (-gamma * (i as f64 - 150.0).abs()).exp()).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    let psi: Vec<f64> = raw.iter().map(|x| x / norm).collect();
    let p = profile(&psi, 0.0).unwrap();
    assert_eq!(p.center, 150);
    assert!((p.decay_rate - gamma).abs() < 1e-6, "{}", p.decay_rate);
    assert!(p.fit_r2 > 0.999);
    assert!(!p.below_floor);
    assert!(profile(&raw, 0.0).is_err(), "unnormalized input must be refused");
    // a point mass has nothing above the amplitude floor to fit
    let mut delta = vec![0.0; n];
    delta[200] = 1.0;
    let p = profile(&delta, 0.0).unwrap();
    assert!(p.below_floor);
    assert_eq!(p.decay_rate, 0.0);
}

#[test]
fn ipr_lies_between_delocalized_and_point_masses() {
    let report = localization_report(&amo(2.5, 0.1), 150, None, &LocalizationOptions::default()).unwrap();
    let dim = 301.0;
    for s in &report.states {
        assert!(s.profile.ipr >= 1.0 / dim - 1e-12 && s.profile.ipr <= 1.0 + 1e-12);
    }
}

#[test]
fn free_laplacian_has_no_localized_states() {
    let report = localization_report(&amo(0.0, 0.0), 500, None, &LocalizationOptions::default()).unwrap();
    assert!(report.interior_count > 0);
    assert_eq!(report.fraction_localized, 0.0);
    assert!(pair_with_lyapunov(&amo(0.0, 0.0), &report, 10).unwrap().is_empty());
}

#[test]
fn subcritical_states_are_extended() {
    let report = localization_report(&amo(1.0, 0.2), 500, None, &LocalizationOptions::default()).unwrap();
    assert!(report.fraction_localized < 0.1, "{}", report.fraction_localized);
}

#[test]
fn supercritical_localization_survives_doubling() {
    let opts = LocalizationOptions::default();
    let small = localization_report(&amo(4.0, 0.2), 500, None, &opts).unwrap();
    let large = localization_report(&amo(4.0, 0.2), 1000, None, &opts).unwrap();
    assert!(small.fraction_localized >= 0.9);
    assert!(large.fraction_localized >= small.fraction_localized - 1e-12);
    let (a, b) = (median_decay(&small), median_decay(&large));
    assert!((a - b).abs() / b < 0.05, "median decay {a} vs {b}");
}

#[test]
fn stricter_thresholds_never_localize_more() {
    let base = localization_report(&amo(2.2, 0.3), 300, None, &LocalizationOptions::default()).unwrap();
    let mut last = usize::MAX;
    for threshold in [0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let r = base.reclassify(&LocalizationOptions { decay_threshold: threshold, ..Default::default() });
        assert!(r.localized_count <= last);
        last = r.localized_count;
    }
}

#[test]
fn shifting_the_phase_by_omega_translates_eigenstates() {
    // V_n(θ + ω) = V_{n+1}(θ): deep localized states move one site left
    let opts = LocalizationOptions::default();
    let a = localization_report(&amo(4.0, 0.15), 300, None, &opts).unwrap();
    let b = localization_report(&amo(4.0, 0.15 + GOLDEN_MEAN), 300, None, &opts).unwrap();
    let mut matched = 0;
    for s in a.states.iter().filter(|s| s.localized && s.center_site.abs() < 200) {
        let t = b
            .states
            .iter()
            .find(|t| (t.profile.energy - s.profile.energy).abs() < 1e-9)
            .unwrap_or_else(|| panic!("no partner for E = {}", s.profile.energy));
        assert_eq!(t.center_site, s.center_site - 1);
        assert!((t.profile.decay_rate - s.profile.decay_rate).abs() < 0.05);
        matched += 1;
    }
    assert!(matched > 300);
}

#[test]
fn strong_coupling_decay_matches_lyapunov_exponent() {
    let pairs = decay_vs_lyapunov(&amo(10.0, 0.2), 500, 40).unwrap();
    assert!(pairs.len() >= 20);
    let gammas: Vec<f64> = pairs.iter().map(|p| p.gamma_hat).collect();
    let gaps: Vec<f64> = pairs.iter().map(|p| p.relative_gap).collect();
    let g = median(&gammas).unwrap();
    assert!(g >= 0.5 * 10f64.ln() && g <= 10f64.ln() + 2f64.ln(), "median γ̂ {g}");
    assert!(median(&gaps).unwrap() < 0.2);
}

#[test]
fn phase_dependence_is_small_in_the_localized_regime() {
    let phases: Vec<Vec<f64>> = (0..4).map(|j| vec![j as f64 / 4.0 + 0.01]).collect();
    let r = decay_by_phase(&amo(6.0, 0.0), 300, &phases).unwrap();
    assert_eq!(r.rows.len(), 4);
    assert!(!r.flagged, "spread {}", r.spread);
}

#[test]
fn strips_are_profiled_slice_by_slice() {
    let strip = OperatorSpec {
        geometry: Geometry::Strip { width: 2 },
        potentials: vec![FourierPotential::cosine(); 2],
        phase: vec![0.1],
        ..amo(8.0, 0.1)
    };
    let report = localization_report(&strip, 300, None, &LocalizationOptions::default()).unwrap();
    assert_eq!(report.states.len(), 2 * 601);
    assert!(report.fraction_localized > 0.9);
}

#[test]
fn planar_boxes_are_unsupported() {
    let planar = OperatorSpec {
        geometry: Geometry::Box2d,
        potentials: vec![FourierPotential::from_terms(
            2,
            [
                (vec![1, 0], num_complex::Complex64::new(0.5, 0.0)),
                (vec![-1, 0], num_complex::Complex64::new(0.5, 0.0)),
            ],
        )
        .unwrap()],
        frequency: qplab::model::FrequencyVector::new(vec![GOLDEN_MEAN, 0.3]).unwrap(),
        phase: vec![0.0, 0.0],
        ..amo(1.0, 0.0)
    };
    assert!(matches!(
        localization_report(&planar, 5, None, &LocalizationOptions::default()),
        Err(qplab::Error::Unsupported(_))
    ));
}
