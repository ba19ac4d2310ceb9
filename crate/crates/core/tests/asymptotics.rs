//! Counterterm tails, inverse-power fits, the constant term, the compatibility fixed point and
//! Lipschitz extension.

mod common;

use std::collections::BTreeMap;

use common::*;
use qnls_core::asymptotics::{
    check_a0, counterterm_profile, fit_inverse_powers, mcshane_extend, quartic_average, solve_compatibility,
    CompatibilitySettings, LipschitzSample, ParamNorm,
};
use qnls_core::frequency::{FrequencyVector, ParametricFrequency};
use qnls_core::lindstedt::eta_first_closed_form;
use qnls_core::lindstedt::{AmplitudeConfig, Engine, EngineSettings};
use qnls_core::scalar::{cx, Real};
use rand::Rng;

fn zeta_q(depth: usize, kappa0: Q, kappa: Vec<Q>) -> ParametricFrequency<Q> {
    ParametricFrequency::new(depth, kappa0, kappa, BTreeMap::new()).unwrap()
}

fn float_amplitudes(modes: &[(i64, f64, f64)]) -> AmplitudeConfig<f64> {
    AmplitudeConfig::new(3, modes.iter().map(|&(j, re, im)| (j, cx(re, im))).collect(), None).unwrap()
}

#[test]
fn parametric_frequency_examples() {
    let z = ParametricFrequency::new(1, 0.1, vec![], BTreeMap::new()).unwrap();
    assert!((z.omega(3) - 9.1).abs() < 1e-15);
    let z = ParametricFrequency::new(3, 0.05, vec![0.2], BTreeMap::from([(2, 0.01), (0, 0.02)])).unwrap();
    assert!((z.omega(2) - (4.0 + 0.05 + 0.05 + 0.01)).abs() < 1e-15);
    assert!((z.omega(0) - 0.07).abs() < 1e-15);
}

#[test]
fn single_mode_first_order_tail_is_constant() {
    let rho = q(1, 3);
    let c = single_mode(cx(rho.clone(), q(0, 1)));
    let modes: Vec<i64> = (2..=12).collect();
    let p = counterterm_profile(&c, &zeta_q(1, q(1, 10), vec![]), 1.0, &modes, 1, EngineSettings::default()).unwrap();
    let expected = -3.0 * (1.0f64 / 3.0).powi(4);
    assert!(p.eta[0].iter().all(|v| (v - expected).abs() < 1e-15), "{:?}", p.eta[0]);
}

#[test]
fn first_order_profile_matches_closed_form() {
    let mut g = rng(21);
    let c = random_amplitudes(&mut g, &[-1, 0, 2], 2);
    let modes: Vec<i64> = (-6..=6).collect();
    let p = counterterm_profile(&c, &zeta_q(1, q(0, 1), vec![]), 1.0, &modes, 1, EngineSettings::default()).unwrap();
    let closed = eta_first_closed_form(&c, &modes);
    for (j, v) in modes.iter().zip(&p.eta[0]) {
        assert_eq!(*v, closed[j].to_f64(), "j = {j}");
    }
    // Off the support the profile is flat, so j-differences vanish beyond the support.
    let tail: Vec<f64> = modes.iter().zip(&p.eta[0]).filter(|(j, _)| !c.contains(**j)).map(|(_, v)| *v).collect();
    assert!(tail.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn synthetic_profile_is_recovered() {
    let depth = 4;
    let modes: Vec<i64> = (20..=200).step_by(3).collect();
    let values: Vec<f64> =
        modes.iter().map(|&j| 5.0 + 2.0 / (j * j) as f64 + 10.0 / (j as f64).powi(depth as i32)).collect();
    // A basis reaching 1/j^N represents the profile exactly.
    let fit = fit_inverse_powers(&modes, &values, depth + 1).unwrap();
    for (q, (a, e)) in fit.coefficients.iter().zip([5.0, 0.0, 2.0, 0.0, 10.0]).enumerate() {
        let tol = if q < 3 { 1e-8 } else { 1e-4 };
        assert!((a - e).abs() < tol, "{:?}", fit.coefficients);
    }
    // The depth-N basis leaves the 1/j^N term in a bounded scaled remainder.
    let fit = fit_inverse_powers(&modes, &values, depth).unwrap();
    assert!((fit.coefficients[0] - 5.0).abs() < 1e-6, "{:?}", fit.coefficients);
    assert!(fit.scaled_remainder_max < 20.0, "{}", fit.scaled_remainder_max);
    assert!(!fit.windows.is_empty());
}

#[test]
fn a0_single_mode_first_order_is_exact() {
    let c = single_mode(cx(q(1, 2), q(1, 4)));
    let probe: Vec<i64> = (3..=12).collect();
    let r = check_a0(&c, &zeta_q(1, q(0, 1), vec![]), 0.01, 1, &probe, 2, EngineSettings::default()).unwrap();
    let rho4 = (0.25f64 + 0.0625).powi(2);
    assert!((r.predicted_by_order[0] + 3.0 * rho4).abs() < 1e-15, "{r:?}");
    assert!(r.relative_deviation < 1e-12, "{r:?}");
}

#[test]
fn a0_multi_mode_first_order_and_linearity() {
    let c = float_amplitudes(&[(-1, 0.2, 0.1), (0, 0.3, -0.05), (2, -0.1, 0.15)]);
    let zeta = ParametricFrequency::new(1, 0.05, vec![], BTreeMap::new()).unwrap();
    let probe: Vec<i64> = (6..=30).collect();
    let r1 = check_a0(&c, &zeta, 0.01, 1, &probe, 2, EngineSettings::default()).unwrap();
    assert!(r1.relative_deviation < 1e-6, "{r1:?}");
    let r2 = check_a0(&c, &zeta, 0.02, 1, &probe, 2, EngineSettings::default()).unwrap();
    assert!((r2.fitted - 2.0 * r1.fitted).abs() < 1e-15 * r1.fitted.abs().max(1.0));
}

#[test]
fn a0_second_order_against_quartic_average() {
    let c = float_amplitudes(&[(-1, 0.2, 0.1), (0, 0.3, -0.05), (1, -0.1, 0.15)]);
    let zeta = ParametricFrequency::new(3, 0.05, vec![0.1], BTreeMap::new()).unwrap();
    let probe: Vec<i64> = (8..=40).collect();
    let r = check_a0(&c, &zeta, 0.01, 2, &probe, 4, EngineSettings::default()).unwrap();
    assert!(r.relative_deviation < 1e-6, "{r:?}");
    assert!(r.deviation_by_order[1] <= 1e-4 * r.predicted_by_order[1].abs(), "{r:?}");
}

#[test]
fn quartic_average_at_order_zero() {
    let mut g = rng(4);
    let c = random_amplitudes(&mut g, &[-2, 0, 1], 2);
    let omega = FrequencyVector::free(20);
    let table = Engine::run(&c, &omega, EngineSettings::with_order(0)).unwrap().coefficients();
    let avg = quartic_average(&table, 0);
    let sq: Vec<Q> = c.amplitudes().values().map(qnls_core::scalar::norm_sqr).collect();
    let total = sq.iter().fold(q(0, 1), |a, b| a + b.clone());
    let quartic = sq.iter().fold(q(0, 1), |a, b| a + b.clone() * b.clone());
    assert_eq!(avg[0].re, q(2, 1) * total.clone() * total - quartic);
    assert_eq!(avg[0].im, q(0, 1));
}

#[test]
fn first_order_a1_fades_across_windows() {
    let c = float_amplitudes(&[(-1, 0.2, 0.1), (0, 0.3, -0.05), (1, -0.1, 0.15)]);
    let zeta = ParametricFrequency::new(3, 0.05, vec![0.1], BTreeMap::new()).unwrap();
    let probe: Vec<i64> = (4..=48).collect();
    let p = counterterm_profile(&c, &zeta, 0.01, &probe, 2, EngineSettings::default()).unwrap();
    let fit = fit_inverse_powers(&probe, &p.eta[1], 4).unwrap();
    let a1: Vec<f64> = fit.windows.iter().map(|w| w.a1.abs()).collect();
    let scale = fit.coefficients[0].abs();
    assert!(a1.windows(2).all(|w| w[1] <= w[0] + 1e-9 * scale), "{a1:?}");
}

fn compat_settings(depth: usize, order: usize, eps: f64) -> CompatibilitySettings {
    CompatibilitySettings {
        depth,
        order,
        eps,
        window: 12,
        fit_start: 5,
        max_iter: 20,
        tol: 1e-10,
        engine: EngineSettings::default(),
    }
}

fn small_potential(seed: u64, depth: usize) -> BTreeMap<i64, f64> {
    let mut g = rng(seed);
    (-12..=12i64)
        .map(|j| (j, g.random_range(-0.2..0.2) / (1.0 + (j * j) as f64).powf(depth as f64 / 2.0)))
        .collect()
}

#[test]
fn compatibility_at_zero_coupling_is_immediate() {
    let c = float_amplitudes(&[(0, 0.3, 0.0), (1, 0.1, 0.1)]);
    let v = small_potential(1, 2);
    let r = solve_compatibility(&v, &c, &compat_settings(2, 1, 0.0)).unwrap();
    assert!(r.converged && r.trace.len() == 1 && r.residual < 1e-12);
    assert!(r.zeta.kappa0 == 0.0 && r.zeta.kappa.iter().all(|k| *k == 0.0));
    assert!(r.zeta.xi.iter().all(|(j, x)| *x == v[j]));
}

#[test]
fn compatibility_converges_at_small_coupling() {
    let c = float_amplitudes(&[(-1, 0.2, 0.1), (0, 0.3, -0.05), (1, -0.1, 0.15)]);
    for (depth, order) in [(0, 1), (3, 1), (3, 2)] {
        let v = small_potential(2, depth);
        let eps = 0.05;
        let r = solve_compatibility(&v, &c, &compat_settings(depth, order, eps)).unwrap();
        assert!(r.converged && r.residual <= 1e-10, "{:?}", r.trace);
        assert!(r.max_contraction < 1.0);
        assert!(r.xi_shift <= 10.0 * eps, "{}", r.xi_shift);
    }
}

#[test]
fn oversized_potential_is_rejected() {
    let c = float_amplitudes(&[(0, 0.3, 0.0)]);
    let v = BTreeMap::from([(1, 0.3)]);
    assert!(solve_compatibility(&v, &c, &compat_settings(2, 1, 0.01)).is_err());
}

#[test]
fn mcshane_extension_is_lipschitz() {
    let mut g = rng(8);
    let l = 1.5;
    let f = |x: &[f64]| (l * x[0]).sin() / 2.0 + 0.3 * x[1].abs();
    let points: Vec<Vec<f64>> = (0..40).map(|_| vec![g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)]).collect();
    let values: Vec<f64> = points.iter().map(|p| f(p)).collect();
    let sample = LipschitzSample::new(points.clone(), values.clone(), l, ParamNorm::Sup).unwrap();
    assert!(sample.is_lipschitz());
    for (p, v) in points.iter().zip(&values) {
        assert!((mcshane_extend(&sample, p).unwrap() - v).abs() < 1e-15);
    }
    for _ in 0..500 {
        let a = [g.random_range(-2.0..2.0), g.random_range(-2.0..2.0)];
        let b = [g.random_range(-2.0..2.0), g.random_range(-2.0..2.0)];
        let gap = (mcshane_extend(&sample, &a).unwrap() - mcshane_extend(&sample, &b).unwrap()).abs();
        assert!(gap <= l * ParamNorm::Sup.distance(&a, &b) + 1e-12);
    }
}
