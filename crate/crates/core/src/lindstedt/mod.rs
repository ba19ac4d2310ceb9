//! Order-by-order solution of the range and kernel equations: coefficients `u^(k)_{j,nu}`,
//! counterterms `eta^(k)_j`, residual verification, norms, evaluation and symmetry checks.

mod checks;
mod engine;
mod residual;
pub mod series;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use checks::{
    eta_first_closed_form, evaluate, evaluate_at_time, gevrey_norm, homogeneity_check, phase_invariance_check,
    quintic_convolution, HomogeneityReport,
};
pub use engine::{first_order_counterterms, EtaSource, Engine};
pub use residual::{residual, ResidualReport};

use crate::error::{Error, Result};
use crate::momentum::{bracket, ModeIndex, SparseMomentum};
use crate::scalar::{modulus_f64, Coeff, Cx, Real};

/// Gevrey decay parameters of the amplitudes: `|c_j| < exp(-s <j>^alpha)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub s: f64,
    pub alpha: f64,
}

/// Amplitudes `c_j` of the linear solution on the window `|j| <= window`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeConfig<R: Real> {
    pub window: i64,
    amplitudes: BTreeMap<ModeIndex, Cx<R>>,
    pub decay: Option<DecayParams>,
}

impl<R: Real> AmplitudeConfig<R> {
    /// Zero amplitudes are dropped from the support.
    pub fn new(window: i64, amplitudes: BTreeMap<ModeIndex, Cx<R>>, decay: Option<DecayParams>) -> Result<Self> {
        if window < 0 {
            return Err(Error::Config(format!("negative amplitude window {window}")));
        }
        let mut kept = BTreeMap::new();
        for (j, c) in amplitudes {
            if j.abs() > window {
                return Err(Error::Window { j, window });
            }
            if Coeff::<R>::is_zero(&c) {
                continue;
            }
            if let Some(d) = decay {
                let bound = (-d.s * bracket(j).powf(d.alpha)).exp();
                if modulus_f64(&c) >= bound {
                    return Err(Error::Config(format!("|c_{j}| = {:e} violates the decay bound {bound:e}", modulus_f64(&c))));
                }
            }
            kept.insert(j, c);
        }
        Ok(Self { window, amplitudes: kept, decay })
    }

    pub fn support(&self) -> Vec<ModeIndex> {
        self.amplitudes.keys().copied().collect()
    }

    pub fn amplitudes(&self) -> &BTreeMap<ModeIndex, Cx<R>> {
        &self.amplitudes
    }

    pub fn get(&self, j: ModeIndex) -> Option<&Cx<R>> {
        self.amplitudes.get(&j)
    }

    pub fn contains(&self, j: ModeIndex) -> bool {
        self.amplitudes.contains_key(&j)
    }

    /// `c -> lambda c`.
    pub fn scaled(&self, lambda: &R) -> Self {
        let amplitudes = self.amplitudes.iter().map(|(j, c)| (*j, Coeff::<R>::scale(c, lambda))).collect();
        Self { window: self.window, amplitudes, decay: None }
    }

    /// `c_j -> rot_j c_j`; missing rotations act as the identity.
    pub fn rotated(&self, rotations: &BTreeMap<ModeIndex, Cx<R>>) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(j, c)| (*j, rotations.get(j).map_or_else(|| c.clone(), |r| c.mul_ref(r))))
            .collect();
        Self { window: self.window, amplitudes, decay: self.decay }
    }

    /// Replaces one amplitude; a zero value removes the mode.
    pub fn with_amplitude(&self, j: ModeIndex, value: Cx<R>) -> Self {
        let mut amplitudes = self.amplitudes.clone();
        if Coeff::<R>::is_zero(&value) {
            amplitudes.remove(&j);
        } else {
            amplitudes.insert(j, value);
        }
        Self { window: self.window.max(j.abs()), amplitudes, decay: None }
    }

    pub fn map_real<S: Real>(&self, f: impl Fn(&R) -> S) -> AmplitudeConfig<S> {
        let amplitudes = self.amplitudes.iter().map(|(j, c)| (*j, Cx::new(f(&c.re), f(&c.im)))).collect();
        AmplitudeConfig { window: self.window, amplitudes, decay: self.decay }
    }
}

/// Engine settings shared by all runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    /// Highest order `K` computed.
    pub order: usize,
    /// Float-mode rejection threshold for `|omega . nu - omega_j|`; exact mode rejects only zero.
    pub divisor_floor: f64,
    /// Float-mode rejection threshold for `|c_j|` when dividing by it.
    pub conditioning_floor: f64,
    /// Largest accepted `order`.
    pub order_cap: usize,
    pub exec: crate::exec::Exec,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self { order: 2, divisor_floor: 1e-10, conditioning_floor: 1e-8, order_cap: 12, exec: crate::exec::Exec::default() }
    }
}

impl EngineSettings {
    pub fn with_order(order: usize) -> Self {
        Self { order, ..Self::default() }
    }
}

/// Coefficients `u^(k)_{j,nu}` per order, keyed by `nu` (the mode is `j = pi(nu)`).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable<R: Real> {
    pub orders: Vec<BTreeMap<SparseMomentum, Cx<R>>>,
}

/// Outcome of the structural key checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyLawReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl KeyLawReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl<R: Real> CoefficientTable<R> {
    pub fn max_order(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    pub fn get(&self, k: usize, j: ModeIndex, nu: &SparseMomentum) -> Option<&Cx<R>> {
        if nu.pi() != j {
            return None;
        }
        self.orders.get(k)?.get(nu)
    }

    pub fn len(&self) -> usize {
        self.orders.iter().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Iterates `(k, j, nu, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, ModeIndex, &SparseMomentum, &Cx<R>)> {
        self.orders.iter().enumerate().flat_map(|(k, t)| t.iter().map(move |(nu, v)| (k, nu.pi(), nu, v)))
    }

    /// Momentum conservation, unit charge, `|nu|_1 <= 4k + 1`, and no kernel entries above order zero.
    pub fn check_key_laws(&self) -> KeyLawReport {
        let mut report = KeyLawReport::default();
        for (k, j, nu, _) in self.iter() {
            report.checked += 1;
            if nu.pi() != j {
                report.violations.push(format!("order {k}: pi([{nu}]) != {j}"));
            }
            if nu.total_charge() != 1 {
                report.violations.push(format!("order {k}: charge of [{nu}] is {}", nu.total_charge()));
            }
            if nu.l1_norm() > 4 * k as i64 + 1 {
                report.violations.push(format!("order {k}: |[{nu}]|_1 > {}", 4 * k + 1));
            }
            if k >= 1 && nu.is_basis(j) {
                report.violations.push(format!("order {k}: kernel entry at j = {j}"));
            }
        }
        report
    }

    pub fn map_real<S: Real>(&self, f: impl Fn(&R) -> S) -> CoefficientTable<S> {
        CoefficientTable {
            orders: self
                .orders
                .iter()
                .map(|t| t.iter().map(|(k, v)| (k.clone(), Cx::new(f(&v.re), f(&v.im)))).collect())
                .collect(),
        }
    }
}

/// Counterterm value with a flag for modes outside the amplitude support.
#[derive(Clone, Debug, PartialEq)]
pub struct CountertermEntry<R: Real> {
    pub value: R,
    /// True when `c_j = 0` and the value is the removable-singularity limit.
    pub extended: bool,
}

/// Counterterms `eta^(k)_j`; `orders[0]` is empty.
#[derive(Clone, Debug, PartialEq)]
pub struct CountertermTable<R: Real> {
    pub orders: Vec<BTreeMap<ModeIndex, CountertermEntry<R>>>,
}

impl<R: Real> Default for CountertermTable<R> {
    fn default() -> Self {
        Self { orders: vec![BTreeMap::new()] }
    }
}

impl<R: Real> CountertermTable<R> {
    pub fn get(&self, k: usize, j: ModeIndex) -> Option<&R> {
        self.orders.get(k)?.get(&j).map(|e| &e.value)
    }

    pub fn insert(&mut self, k: usize, j: ModeIndex, value: R, extended: bool) {
        while self.orders.len() <= k {
            self.orders.push(BTreeMap::new());
        }
        self.orders[k].insert(j, CountertermEntry { value, extended });
    }

    pub fn max_order(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, ModeIndex, &CountertermEntry<R>)> {
        self.orders.iter().enumerate().flat_map(|(k, t)| t.iter().map(move |(j, e)| (k, *j, e)))
    }

    /// Only the entries with `c_j != 0`.
    pub fn on_support(&self) -> Self {
        Self {
            orders: self
                .orders
                .iter()
                .map(|t| t.iter().filter(|(_, e)| !e.extended).map(|(j, e)| (*j, e.clone())).collect())
                .collect(),
        }
    }

    pub fn map_real<S: Real>(&self, f: impl Fn(&R) -> S) -> CountertermTable<S> {
        CountertermTable {
            orders: self
                .orders
                .iter()
                .map(|t| t.iter().map(|(j, e)| (*j, CountertermEntry { value: f(&e.value), extended: e.extended })).collect())
                .collect(),
        }
    }
}
