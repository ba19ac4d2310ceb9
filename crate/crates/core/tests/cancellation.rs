//! Resonant matrices: derivative identity, sign structure and chain cancellation.

mod common;

use common::*;
use qnls_core::cancellation::{
    chain_cancellation_check, derivative_identity_check, structure_at_zero_check, resonant_matrix, RESONANT_TREE_CAP,
};
use qnls_core::lindstedt::{AmplitudeConfig, CountertermTable, Engine, EngineSettings};
use qnls_core::frequency::FrequencyVector;
use qnls_core::momentum::Sign;
use qnls_core::Error;
use rand::Rng;

const SUPPORT: [i64; 3] = [-2, 0, 1];
const SIGNS: [Sign; 2] = [Sign::Plus, Sign::Minus];

fn setup(seed: u64) -> (AmplitudeConfig<Q>, FrequencyVector<Q>) {
    let mut g = rng(seed);
    (random_amplitudes(&mut g, &SUPPORT, 2), generic_omega(&mut g, 40))
}

/// Counterterms solved through `order` and extended to every mode the trees can reach.
fn solved(c: &AmplitudeConfig<Q>, w: &FrequencyVector<Q>, order: usize) -> CountertermTable<Q> {
    let mut engine = Engine::run(c, w, EngineSettings::with_order(order)).unwrap();
    engine.complete_counterterms(order).unwrap();
    engine.counterterms().clone()
}

/// Arbitrary first-order counterterms on the whole frequency window.
fn free_first_order(seed: u64) -> CountertermTable<Q> {
    let mut g = rng(seed);
    let mut table = CountertermTable::default();
    for j in -40..=40 {
        table.insert(1, j, q(g.random_range(-50..=50), 17), false);
    }
    table
}

#[test]
fn first_order_identity_holds_exactly_for_free_counterterms() {
    let (c, w) = setup(5);
    let eta = free_first_order(6);
    for j in SUPPORT {
        for partner in SUPPORT {
            for s in SIGNS {
                for t in SIGNS {
                    let r = derivative_identity_check(1, j, s, partner, t, &c, &w, &eta, EngineSettings::default()).unwrap();
                    assert!(r.exact, "j={j} j'={partner} {s:?}{t:?}: {r:?}");
                }
            }
        }
    }
}

#[test]
fn first_order_identity_in_float_mode() {
    let (c, w) = setup(5);
    let eta = free_first_order(6);
    let (cf, wf, etaf) = (to_float_amplitudes(&c), to_float_omega(&w), eta.map_real(qnls_core::scalar::Real::to_f64));
    for (s, t) in [(Sign::Plus, Sign::Plus), (Sign::Plus, Sign::Minus), (Sign::Minus, Sign::Plus)] {
        let r = derivative_identity_check(1, 0, s, 1, t, &cf, &wf, &etaf, EngineSettings::default()).unwrap();
        assert!(r.deviation <= 1e-6 * (1.0 + r.derivative.norm()), "{r:?}");
    }
}

#[test]
fn second_order_identity_with_solved_counterterms() {
    let (c, w) = setup(7);
    let eta = solved(&c, &w, 2);
    for (j, partner, s, t) in [(0, 1, Sign::Plus, Sign::Plus), (0, 1, Sign::Plus, Sign::Minus), (-2, -2, Sign::Minus, Sign::Plus)] {
        let r = derivative_identity_check(2, j, s, partner, t, &c, &w, &eta, EngineSettings::default()).unwrap();
        assert!(r.exact, "j={j} j'={partner} {s:?}{t:?}: {r:?}");
    }
}

#[test]
fn sign_structure_at_first_order() {
    let (c, w) = setup(9);
    let eta = solved(&c, &w, 1);
    let grid = [q(-1, 7), q(1, 5), q(2, 3)];
    for j in SUPPORT {
        for partner in SUPPORT {
            let r = structure_at_zero_check(1, j, partner, &grid, &c, &w, &eta).unwrap();
            assert!(r.exact, "j={j} j'={partner}: {r:?}");
            if j != partner {
                assert_eq!(r.diagonal_block, 0.0);
            }
        }
    }
}

#[test]
fn sign_structure_at_second_order() {
    let (c, w) = setup(11);
    let eta = solved(&c, &w, 2);
    let r = structure_at_zero_check(2, 0, 1, &[q(1, 9)], &c, &w, &eta).unwrap();
    assert!(r.exact, "{r:?}");
    let r = structure_at_zero_check(2, 1, 1, &[], &c, &w, &eta).unwrap();
    assert!(r.exact, "{r:?}");
}

#[test]
fn sign_structure_in_float_mode() {
    let (c, w) = setup(9);
    let eta = solved(&c, &w, 1);
    let (cf, wf, etaf) = (to_float_amplitudes(&c), to_float_omega(&w), eta.map_real(qnls_core::scalar::Real::to_f64));
    let r = structure_at_zero_check(1, -2, 0, &[0.125, -0.3], &cf, &wf, &etaf).unwrap();
    assert!(r.max_imag < 1e-12 && r.reconstruction_deviation < 1e-12 && r.det_at_zero < 1e-12 && r.split_at_zero < 1e-12, "{r:?}");
}

#[test]
fn chains_cancel_exactly() {
    let (c, w) = setup(13);
    let eta = solved(&c, &w, 1);
    let r = chain_cancellation_check(&[1, 1], &[0, 1, -2], &c, &w, &eta).unwrap();
    assert!(r.exact_zero, "{r:?}");
    assert!(r.factor_scale > 0.0);
    // First-order derivatives vanish identically, so the middle factor is taken at order two.
    let eta = solved(&c, &w, 2);
    let r = chain_cancellation_check(&[1, 2, 1], &[1, 1, 0, -2], &c, &w, &eta).unwrap();
    assert!(r.exact_zero, "{r:?}");
    assert!(r.factor_scale > 0.0);
}

#[test]
fn chains_do_not_cancel_for_free_counterterms() {
    let (c, w) = setup(13);
    let eta = free_first_order(2);
    // Off the diagonal the first-order factors do not read counterterms; the diagonal one does.
    let r = chain_cancellation_check(&[1, 1], &[0, 0, 1], &c, &w, &eta).unwrap();
    assert!(!r.exact_zero, "{r:?}");
}

#[test]
fn matrix_layout_and_caps() {
    let (c, w) = setup(5);
    let eta = solved(&c, &w, 2);
    let x = q(1, 3);
    // Single-node trees have no shifted lines; at order two the matrix depends on x.
    let first = resonant_matrix(1, 0, 1, &x, &c, &w, &eta).unwrap();
    assert!(first.x_derivative.iter().flatten().all(|z| z.re == q(0, 1) && z.im == q(0, 1)));
    let m = resonant_matrix(2, 0, 1, &x, &c, &w, &eta).unwrap();
    let minus = resonant_matrix(2, 0, 1, &-x.clone(), &c, &w, &eta).unwrap();
    assert_ne!(m.entries, minus.entries);
    assert!(matches!(
        resonant_matrix(RESONANT_TREE_CAP + 1, 0, 1, &x, &c, &w, &eta),
        Err(Error::OrderCap { .. })
    ));
}
