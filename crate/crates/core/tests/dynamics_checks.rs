// Reference values carry more digits than f64 holds, as published by the oracle.
#![allow(clippy::excessive_precision)]

use num_complex::Complex64;
use qplab::dynamics::*;
use qplab::model::{OperatorSpec, GOLDEN_MEAN};

fn amo(lambda: f64, theta: f64) -> OperatorSpec {
    OperatorSpec::almost_mathieu(lambda, GOLDEN_MEAN, theta).unwrap()
}

fn norm(psi: &[Complex64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// |J_n(x)| for n = 0..=3, evaluated in 30-digit arithmetic.
const BESSEL_AT_10: [f64; 4] = [
    0.245_935_764_451_348_335,
    0.043_472_746_168_861_436_7,
    0.254_630_313_685_120_622,
    0.058_379_379_305_186_812_3,
];
const BESSEL_AT_5: [f64; 4] = [
    0.177_596_771_314_338_304,
    0.327_579_137_591_465_222,
    0.046_565_116_277_752_215_5,
    0.364_831_230_613_666_994,
];

#[test]
fn free_evolution_matches_bessel_functions() {
    // e^{−itΔ}δ₀ has amplitudes iⁿ J_n(2t)
    let prop = Propagator::new(&amo(0.0, 0.0), 200).unwrap();
    let psi0 = prop.origin_state();
    for (t, table) in [(5.0, BESSEL_AT_10), (2.5, BESSEL_AT_5)] {
        let psi = prop.apply(&psi0, t).unwrap();
        for (n, want) in table.iter().enumerate() {
            for site in [200 + n, 200 - n] {
                assert!((psi[site].norm() - want).abs() < 1e-12, "t={t} n={n}: {}", psi[site].norm());
            }
        }
    }
}

#[test]
fn free_spreading_is_ballistic() {
    let run = evolve(&amo(0.0, 0.0), 200, None, &[0.0, 1.0, 5.0], false).unwrap();
    assert_eq!(run.x2_instant[0], 0.0);
    for (t, x2) in run.times.iter().zip(&run.x2_instant).skip(1) {
        assert!((x2 / (2.0 * t * t) - 1.0).abs() < 5e-3, "t={t}: {x2}");
    }
}

#[test]
fn evolution_is_unitary_and_conserves_energy() {
    let spec = amo(2.0, 0.3);
    let prop = Propagator::new(&spec, 150).unwrap();
    let mut psi0: Vec<Complex64> = (0..prop.dim())
        .map(|i| Complex64::new((-((i as f64 - 150.0) / 6.0).powi(2)).exp(), 0.1 * i as f64 / prop.dim() as f64))
        .collect();
    let n0 = norm(&psi0);
    psi0.iter_mut().for_each(|z| *z /= n0);
    let e0 = prop.energy(&psi0);
    for t in [0.5, 10.0, 400.0, 1e4] {
        let psi = prop.apply(&psi0, t).unwrap();
        assert!((norm(&psi) - 1.0).abs() < 1e-10);
        assert!((prop.energy(&psi) - e0).abs() < 1e-9);
        // evolving backwards recovers the initial state
        let back = prop.apply(&psi, -t).unwrap();
        let err = back.iter().zip(&psi0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-9, "t={t}: {err}");
    }
}

#[test]
fn batched_and_single_propagation_agree() {
    let prop = Propagator::new(&amo(1.3, 0.1), 80).unwrap();
    let psi0 = prop.origin_state();
    let times = [0.0, 0.7, 3.0, 50.0];
    let many = prop.apply_many(&psi0, &times).unwrap();
    for (t, psi) in times.iter().zip(&many) {
        let one = prop.apply(&psi0, *t).unwrap();
        assert!(one.iter().zip(psi).all(|(a, b)| (a - b).norm() < 1e-12));
    }
    // the run records the initial state itself at t = 0
    let run = evolve_with(&prop, None, &times, true).unwrap();
    assert_eq!(run.states.unwrap()[0], psi0);
}

#[test]
fn even_potential_keeps_evolution_symmetric() {
    // at θ = 0 the potential is even in n, and so is e^{−itH}δ₀
    let prop = Propagator::new(&amo(1.7, 0.0), 120).unwrap();
    let psi = prop.apply(&prop.origin_state(), 30.0).unwrap();
    for n in 1..=120 {
        assert!((psi[120 + n] - psi[120 - n]).norm() < 1e-10);
    }
}

#[test]
fn diagonal_limit_freezes_the_wavepacket() {
    let mut spec = amo(3.0, 0.2);
    spec.diagonal_limit = true;
    let run = evolve(&spec, 50, None, &log_time_grid(100.0, 20).unwrap(), true).unwrap();
    assert!(run.x2_instant.iter().all(|&x| x == 0.0));
    assert!(run.valid);
}

#[test]
fn cesaro_average_is_exact_for_linear_data() {
    let times = log_time_grid(50.0, 40).unwrap();
    let constant = cesaro_average(&times, &vec![3.0; times.len()]);
    assert!(constant.iter().skip(1).all(|&v| (v - 3.0).abs() < 1e-12));
    let linear: Vec<f64> = times.iter().map(|t| 4.0 * t).collect();
    let avg = cesaro_average(&times, &linear);
    for (t, a) in times.iter().zip(&avg).skip(1) {
        assert!((a - 2.0 * t).abs() < 1e-10 * t.max(1.0));
    }
}

#[test]
fn free_time_average_grows_like_two_thirds_t_squared() {
    let times = log_time_grid(60.0, 400).unwrap();
    let run = evolve(&amo(0.0, 0.0), 300, None, &times, false).unwrap();
    let m = moments(&run).unwrap();
    let t = *m.times.last().unwrap();
    let avg = *m.x2_avg.last().unwrap();
    assert!((avg / (2.0 * t * t / 3.0) - 1.0).abs() < 1e-2, "{avg}");
    let fit = transport_exponent(&m, (10.0, 60.0)).unwrap();
    assert!((fit.beta - 2.0).abs() < 0.02, "{fit:?}");
    assert!(fit.ci95.0 <= fit.beta && fit.beta <= fit.ci95.1);
}

#[test]
fn boundary_contact_invalidates_runs() {
    let run = evolve(&amo(0.0, 0.0), 40, None, &log_time_grid(100.0, 30).unwrap(), false).unwrap();
    assert!(!run.valid);
    assert!(run.boundary_mass_max > BOUNDARY_MASS_LIMIT);
    assert!(matches!(moments(&run), Err(qplab::Error::Refused(_))));
}

#[test]
fn transport_fit_needs_enough_points() {
    let run = evolve(&amo(0.0, 0.0), 100, None, &log_time_grid(10.0, 30).unwrap(), false).unwrap();
    let m = moments(&run).unwrap();
    assert!(matches!(transport_exponent(&m, (9.0, 10.0)), Err(qplab::Error::Refused(_))));
}

#[test]
fn localized_spreading_saturates() {
    let run = evolve(&amo(4.0, 0.0), 150, None, &log_time_grid(1000.0, 100).unwrap(), false).unwrap();
    let m = moments(&run).unwrap();
    assert!(plateau_ratio(&m).unwrap() < 1.1);
    let r = strong_dl_metric(&amo(4.0, 0.0), 150, 4, 200.0, 40).unwrap();
    assert!(r.valid && r.per_phase.len() == 4 && r.metric < 5.0, "{r:?}");
}

#[test]
fn bad_time_grids_are_rejected() {
    let spec = amo(1.0, 0.0);
    assert!(evolve(&spec, 20, None, &[1.0, 0.5], false).is_err());
    assert!(evolve(&spec, 20, None, &[-1.0], false).is_err());
    assert!(evolve(&spec, 20, None, &[f64::NAN], false).is_err());
    assert!(log_time_grid(0.0, 10).is_err());
    assert!(log_time_grid(10.0, 1).is_err());
}
