//! Residual of the modified torus equation for a truncated series.
//!
//! The quintic term is rebuilt from scratch as `(((U conj(U)) U) conj(U)) U` on series keyed by
//! the pair `(j, nu)`, without using `j = pi(nu)` or the product caches of the engine.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::series::{conj_reflect, convolve_into, Series};
use super::{CoefficientTable, CountertermTable};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frequency::FrequencyVector;
use crate::momentum::{ModeIndex, SparseMomentum};
use crate::scalar::{modulus_f64, Coeff, Cx, Real};

type Key = (ModeIndex, SparseMomentum);
type Graded<R> = Vec<Series<Key, Cx<R>>>;

/// Per-order residual magnitudes, index `k` for the coefficient of `eps^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_abs: Vec<f64>,
    /// `max_abs` divided by the largest single term of the same order.
    pub relative: Vec<f64>,
    /// True when every coefficient of the order is exactly zero.
    pub exact_zero: Vec<bool>,
    pub keys: Vec<usize>,
}

fn graded_mul<R: Real>(x: &Graded<R>, y: &Graded<R>, top: usize, exec: Exec) -> Graded<R> {
    (0..=top)
        .map(|n| {
            let mut acc = Series::new();
            for a in 0..=n {
                if let (Some(xa), Some(yb)) = (x.get(a), y.get(n - a)) {
                    convolve_into(&mut acc, xa, yb, exec);
                }
            }
            acc
        })
        .collect()
}

/// Residual coefficients of orders `0..=through`; coefficients and counterterms above the
/// tables count as zero.
pub fn residual<R: Real>(
    coeffs: &CoefficientTable<R>,
    eta: &CountertermTable<R>,
    omega: &FrequencyVector<R>,
    through: usize,
    exec: Exec,
) -> Result<ResidualReport> {
    let u: Graded<R> = (0..=through)
        .map(|k| match coeffs.orders.get(k) {
            Some(t) => t.iter().map(|(nu, v)| ((nu.pi(), nu.clone()), v.clone())).collect(),
            None => Series::new(),
        })
        .collect();
    let ubar: Graded<R> = u.iter().map(conj_reflect).collect();
    let nonlinear = if through == 0 {
        Vec::new()
    } else {
        let top = through - 1;
        let a = graded_mul(&u, &ubar, top, exec);
        let b = graded_mul(&a, &u, top, exec);
        let c = graded_mul(&b, &ubar, top, exec);
        graded_mul(&c, &u, top, exec)
    };

    let mut report = ResidualReport { max_abs: vec![], relative: vec![], exact_zero: vec![], keys: vec![] };
    for k in 0..=through {
        let mut keys: BTreeSet<Key> = u[k].map.keys().cloned().collect();
        for lower in &u[..k] {
            keys.extend(lower.map.keys().cloned());
        }
        if k >= 1 {
            keys.extend(nonlinear[k - 1].map.keys().cloned());
        }
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        let mut exact = true;
        for key in &keys {
            let (j, nu) = key;
            let mut total: Cx<R> = Coeff::<R>::zero();
            if let Some(v) = u[k].get(key) {
                let d = omega.omega(*j)? - omega.dot(nu)?;
                let term = Coeff::<R>::scale(v, &d);
                scale = scale.max(modulus_f64(&term));
                total.add_assign_ref(&term);
            }
            for k1 in 1..=k {
                if let Some(v) = u[k - k1].get(key) {
                    if Coeff::<R>::is_zero(v) || k1 > eta.max_order() {
                        continue;
                    }
                    let e = eta.get(k1, *j).ok_or_else(|| {
                        Error::Precondition(format!("residual at order {k} needs the counterterm at order {k1}, mode {j}"))
                    })?;
                    let term = Coeff::<R>::scale(v, e);
                    scale = scale.max(modulus_f64(&term));
                    total.add_assign_ref(&term);
                }
            }
            if k >= 1 {
                if let Some(v) = nonlinear[k - 1].get(key) {
                    scale = scale.max(modulus_f64(v));
                    total.add_assign_ref(v);
                }
            }
            exact &= Coeff::<R>::is_zero(&total);
            worst = worst.max(modulus_f64(&total));
        }
        report.max_abs.push(worst);
        report.relative.push(if scale > 0.0 { worst / scale } else { 0.0 });
        report.exact_zero.push(exact);
        report.keys.push(keys.len());
    }
    Ok(report)
}
