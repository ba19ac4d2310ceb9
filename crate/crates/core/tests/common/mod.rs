//! Shared fixtures for integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use qnls_core::frequency::FrequencyVector;
use qnls_core::lindstedt::AmplitudeConfig;
use qnls_core::scalar::{cx, Cx, Rational, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Q = Rational;

pub fn q(n: i64, d: i64) -> Q {
    Q::from_ratio(n, d)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Amplitudes with components in `{-4/16, ..., 4/16}` on the given modes, never zero.
pub fn random_amplitudes(rng: &mut ChaCha8Rng, modes: &[i64], window: i64) -> AmplitudeConfig<Q> {
    let mut table = BTreeMap::new();
    for &j in modes {
        let (mut re, mut im) = (0, 0);
        while re == 0 && im == 0 {
            re = rng.random_range(-4..=4);
            im = rng.random_range(-4..=4);
        }
        table.insert(j, cx(q(re, 16), q(im, 16)));
    }
    AmplitudeConfig::new(window, table, None).unwrap()
}

/// `j^2 + V_j` with small rational potentials of large denominator.
pub fn generic_omega(rng: &mut ChaCha8Rng, window: i64) -> FrequencyVector<Q> {
    let v = (-window..=window).map(|j| (j, q(rng.random_range(-2000..=2000), 4001 + 2 * (j + window)))).collect();
    FrequencyVector::with_potential(v, window)
}

pub fn to_float_amplitudes(c: &AmplitudeConfig<Q>) -> AmplitudeConfig<f64> {
    c.map_real(|x| x.to_f64())
}

pub fn to_float_omega(w: &FrequencyVector<Q>) -> FrequencyVector<f64> {
    w.map_real(|x| x.to_f64())
}

pub fn single_mode(rho: Cx<Q>) -> AmplitudeConfig<Q> {
    AmplitudeConfig::new(0, BTreeMap::from([(0, rho)]), None).unwrap()
}
