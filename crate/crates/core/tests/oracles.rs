//! The naive recursion against the engine, the integer inequalities and the permutation sums.

mod common;

use std::collections::BTreeMap;

use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use qnls_core::exec::Exec;
use qnls_core::lindstedt::{AmplitudeConfig, CoefficientTable, Engine, EngineSettings};
use qnls_core::momentum::Sign;
use qnls_core::oracles::*;
use qnls_core::scalar::{cx, Coeff, Real};

fn nonzero<R: Real>(table: &CoefficientTable<R>) -> CoefficientTable<R> {
    CoefficientTable {
        orders: table.orders.iter().map(|m| m.iter().filter(|(_, v)| !Coeff::<R>::is_zero(*v)).map(|(k, v)| (k.clone(), v.clone())).collect()).collect(),
    }
}

fn assert_agrees(c: &AmplitudeConfig<Q>, w: &qnls_core::frequency::FrequencyVector<Q>, order: usize) {
    let brute = brute_quintic(c, w, order).unwrap();
    let mut engine = Engine::run(c, w, EngineSettings::with_order(order)).unwrap();
    assert_eq!(nonzero(&brute.coefficients), nonzero(&engine.coefficients()));
    for ((k, j), v) in &brute.counterterms {
        assert_eq!(*v, engine.eta(*k, *j).unwrap(), "eta^({k})_{j}");
    }
}

#[test]
fn brute_recursion_matches_engine() {
    for (seed, support) in [(1, vec![-1, 0, 2]), (2, vec![0, 1]), (3, vec![-2, -1, 1, 3])] {
        let mut g = rng(seed);
        let c = random_amplitudes(&mut g, &support, 3);
        let w = generic_omega(&mut g, 45);
        assert_agrees(&c, &w, 2);
    }
}

#[test]
fn brute_recursion_degenerate_supports() {
    let c = single_mode(cx(q(1, 3), q(-1, 5)));
    let w = qnls_core::frequency::FrequencyVector::free(0);
    let brute = brute_quintic(&c, &w, 2).unwrap();
    assert!(brute.coefficients.orders[1..].iter().all(|m| m.is_empty()));
    assert_agrees(&c, &w, 2);
    if let Ok(empty) = AmplitudeConfig::<Q>::new(2, BTreeMap::new(), None) {
        let brute = brute_quintic(&empty, &qnls_core::frequency::FrequencyVector::free(2), 2).unwrap();
        assert!(brute.coefficients.orders.iter().all(|m| m.is_empty()));
    }
    assert!(brute_quintic(&c, &w, BRUTE_ORDER_CAP + 1).is_err());
}

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[test]
fn permutation_spec_examples() {
    assert!(permutation_sum(&[r(1, 1), r(-1, 1)], PermutationMode::AllowedOnly).unwrap().value.is_zero());
    assert_eq!(permutation_sum(&[r(1, 1), r(2, 1)], PermutationMode::All).unwrap().value, r(3, 2));
    let s = permutation_sum(&[r(1, 1), r(2, 1), r(-3, 1)], PermutationMode::AllowedOnly).unwrap();
    assert!(s.value.is_zero() && s.counted + s.excluded == 6);
    let x = [r(1, 1), r(2, 1), r(3, 1)];
    assert_eq!(permutation_sum(&x, PermutationMode::All).unwrap().value, r(1, 1));
    assert_eq!(permutation_closed_form(&x), r(1, 1));
    assert!(permutation_sum(&[r(1, 1), r(0, 1)], PermutationMode::All).is_err());
}

#[test]
fn permutation_sum_with_forbidden_orderings() {
    let x = [r(2, 1), r(-2, 1), r(1, 3), r(5, 7), r(-1, 1)];
    let fast = permutation_sum(&x, PermutationMode::All).unwrap();
    assert_eq!(fast, permutation_sum_enumerated(&x, PermutationMode::All).unwrap());
    assert!(fast.excluded > 0);
}

#[test]
fn inequality_spec_examples() {
    let c = fractional_power_check(&[5, 3, 2], &[Sign::Minus, Sign::Minus], 0.5).unwrap();
    assert!(c.holds && (c.lhs - 0.9101).abs() < 1e-3 && (c.rhs - 0.8284).abs() < 1e-3);
    let c = square_sum_check(&[5, 4, 3], &[Sign::Plus, Sign::Minus, Sign::Minus], 3).unwrap();
    assert!(c.holds);
    assert!(square_sum_check(&[5, 4, 3], &[Sign::Plus, Sign::Plus, Sign::Minus], 3).is_err());
}

#[test]
fn random_suites_are_clean_and_reproducible() {
    let sizes = SuiteSizes { fractional_power: 20_000, square_sum: 20_000, permutation: 2_000, closed_form: 300, max_len: 7 };
    let reports = default_suite(sizes, 17, Exec::default());
    for report in &reports {
        assert!(report.passed(), "{report:?}");
    }
    let again = default_suite(sizes, 17, Exec::Sequential);
    assert_eq!(reports, again);
}
