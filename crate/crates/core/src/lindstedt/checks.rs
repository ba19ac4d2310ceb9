//! Closed forms, norms, point evaluation and symmetry checks built on the engine.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{AmplitudeConfig, CoefficientTable, Engine, EngineSettings};
use crate::error::Result;
use crate::frequency::FrequencyVector;
use crate::momentum::{bracket, ModeIndex, SparseMomentum};
use crate::scalar::{modulus_f64, norm_sqr, to_c64, Coeff, Cx, Real};

/// `sum` over `nu_1 - nu_2 + nu_3 - nu_4 + nu_5 = target` of `u_1 conj(u_2) u_3 conj(u_4) u_5`,
/// factor `i` read from order `orders[i]`.
pub fn quintic_convolution<R: Real>(table: &CoefficientTable<R>, orders: [usize; 5], target: &SparseMomentum) -> Cx<R> {
    let empty = BTreeMap::new();
    let level = |i: usize| table.orders.get(orders[i]).unwrap_or(&empty);
    let mut total: Cx<R> = Coeff::<R>::zero();
    for (n1, v1) in level(0) {
        for (n2, v2) in level(1) {
            let p12 = v1.mul_ref(&v2.conj());
            let m12 = n1.sub(n2);
            for (n3, v3) in level(2) {
                let p123 = p12.mul_ref(v3);
                let m123 = m12.add(n3);
                for (n4, v4) in level(3) {
                    let rest = target.sub(&m123).add(n4);
                    if let Some(v5) = level(4).get(&rest) {
                        total.add_assign_ref(&p123.mul_ref(&v4.conj()).mul_ref(v5));
                    }
                }
            }
        }
    }
    total
}

/// First-order counterterm from its closed form, with unordered pairs in the last sum.
pub fn eta_first_closed_form<R: Real>(amplitudes: &AmplitudeConfig<R>, modes: &[ModeIndex]) -> BTreeMap<ModeIndex, R> {
    let sq: Vec<(ModeIndex, R)> = amplitudes.amplitudes().iter().map(|(j, c)| (*j, norm_sqr(c))).collect();
    let mut out = BTreeMap::new();
    for &j in modes {
        let cj = sq.iter().find(|p| p.0 == j).map_or_else(R::zero, |p| p.1.clone());
        let others: Vec<&R> = sq.iter().filter(|p| p.0 != j).map(|p| &p.1).collect();
        let mut v = -(cj.clone() * cj.clone());
        for a in &others {
            v = v - R::from_int(6) * (*a).clone() * cj.clone() - R::from_int(3) * (*a).clone() * (*a).clone();
        }
        for (x, a) in others.iter().enumerate() {
            for b in &others[x + 1..] {
                v = v - R::from_int(12) * (*a).clone() * (*b).clone();
            }
        }
        out.insert(j, v);
    }
    out
}

/// `sum_k eps^k sum u^(k)_{j,nu} exp(i (j x + nu . phi))` with `phi_i = phase(i)`.
pub fn evaluate<R: Real>(table: &CoefficientTable<R>, eps: f64, x: f64, phase: impl Fn(ModeIndex) -> f64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for (k, j, nu, v) in table.iter() {
        let arg = j as f64 * x + nu.entries().iter().map(|&(i, c)| c as f64 * phase(i)).sum::<f64>();
        total += eps.powi(k as i32) * to_c64(v) * Complex64::from_polar(1.0, arg);
    }
    total
}

/// [`evaluate`] on the orbit `phi = omega t`.
pub fn evaluate_at_time<R: Real>(
    table: &CoefficientTable<R>,
    omega: &FrequencyVector<R>,
    eps: f64,
    x: f64,
    t: f64,
) -> Result<Complex64> {
    let window = omega.window;
    let table_omega = omega.to_f64_table()?;
    for (_, _, nu, _) in table.iter() {
        for i in nu.indices() {
            omega.omega(i)?;
        }
    }
    Ok(evaluate(table, eps, x, |i| table_omega[(i + window) as usize] * t))
}

/// `sup |eps^k u^(k)_{j,nu}| exp(s1 |nu|_alpha + s2 <j>^alpha)` over orders `>= min_order`.
pub fn gevrey_norm<R: Real>(table: &CoefficientTable<R>, eps: f64, s1: f64, s2: f64, alpha: f64, min_order: usize) -> f64 {
    table
        .iter()
        .filter(|(k, ..)| *k >= min_order)
        .map(|(k, j, nu, v)| {
            eps.abs().powi(k as i32) * modulus_f64(v) * (s1 * nu.weighted_norm(alpha) + s2 * bracket(j).powf(alpha)).exp()
        })
        .fold(0.0, f64::max)
}

/// Deviations from `eta^(k)(lambda c) = lambda^{4k} eta^(k)(c)` and `u^(k)(lambda c) = lambda^{4k+1} u^(k)(c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub eta_deviation: f64,
    pub u_deviation: f64,
    /// True when both deviations vanish exactly.
    pub exact: bool,
    pub compared: usize,
}

/// Runs the engine at `c` and `lambda c` and compares the scaled outputs.
pub fn homogeneity_check<R: Real>(
    amplitudes: &AmplitudeConfig<R>,
    omega: &FrequencyVector<R>,
    settings: EngineSettings,
    lambda: &R,
) -> Result<HomogeneityReport> {
    let base = Engine::run(amplitudes, omega, settings)?;
    let scaled = Engine::run(&amplitudes.scaled(lambda), omega, settings)?;
    let pow = |n: usize| (0..n).fold(R::one(), |acc, _| acc * lambda.clone());
    let mut report = HomogeneityReport { eta_deviation: 0.0, u_deviation: 0.0, exact: true, compared: 0 };
    for (k, j, e) in base.counterterms().iter() {
        if let Some(other) = scaled.counterterms().get(k, j) {
            let diff = other.clone() - e.value.clone() * pow(4 * k);
            report.exact &= diff.is_zero();
            let rel = diff.to_f64().abs() / (e.value.to_f64().abs() * pow(4 * k).to_f64()).max(f64::MIN_POSITIVE);
            report.eta_deviation = report.eta_deviation.max(if R::EXACT { diff.to_f64().abs() } else { rel });
            report.compared += 1;
        }
    }
    let (a, b) = (base.coefficients(), scaled.coefficients());
    for (k, _, nu, v) in a.iter() {
        let w = b.orders.get(k).and_then(|t| t.get(nu)).cloned().unwrap_or_else(Coeff::<R>::zero);
        let expect = Coeff::<R>::scale(v, &pow(4 * k + 1));
        let diff = w.sub_ref(&expect);
        report.exact &= Coeff::<R>::is_zero(&diff);
        let rel = modulus_f64(&diff) / modulus_f64(&expect).max(f64::MIN_POSITIVE);
        report.u_deviation = report.u_deviation.max(if R::EXACT { modulus_f64(&diff) } else { rel });
        report.compared += 1;
    }
    Ok(report)
}

/// Largest `|eta^(k)_j(c) - eta^(k)_j(rot c)|` over all counterterms present in both runs.
///
/// Float mode returns the deviation relative to `max |eta|`.
pub fn phase_invariance_check<R: Real>(
    amplitudes: &AmplitudeConfig<R>,
    omega: &FrequencyVector<R>,
    settings: EngineSettings,
    rotations: &BTreeMap<ModeIndex, Cx<R>>,
) -> Result<f64> {
    let base = Engine::run(amplitudes, omega, settings)?;
    let turned = Engine::run(&amplitudes.rotated(rotations), omega, settings)?;
    let mut worst = 0.0f64;
    let mut size = 0.0f64;
    for (k, j, e) in base.counterterms().iter() {
        size = size.max(e.value.to_f64().abs());
        if let Some(other) = turned.counterterms().get(k, j) {
            let diff = other.clone() - e.value.clone();
            if !diff.is_zero() {
                worst = worst.max(diff.to_f64().abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok(if R::EXACT || size == 0.0 { worst } else { worst / size })
}
