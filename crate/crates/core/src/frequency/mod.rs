//! Frequency vectors, small divisors, lattice infima, scales, partition of unity and
//! Monte-Carlo measure estimates.

mod bryuno;
mod measure;
mod partition;
mod search;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use bryuno::{bryuno_sum, BryunoSchedule};
pub use measure::{measure_sample, measure_sweep, sample_frequencies, MeasureConfig, MeasureEstimate, MeasureSweep};
pub use partition::{bump, build_scale_sequence, cutoff, PartitionOfUnity, ScaleSequence};
pub use search::{
    beta, beta0, beta_star, diophantine_check, diophantine_margin, stimobeta_exponent, DiophantineVerdict, LatticeInfimum,
    SearchBudget,
};

use crate::error::{Error, Result};
use crate::momentum::{ModeIndex, SparseMomentum};
use crate::scalar::Real;

/// Frequencies of the parametric family: `j^2 + kappa_0 + sum_q kappa_q / j^q + xi_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Serialize + serde::de::DeserializeOwned")]
pub struct ParametricFrequency<R> {
    /// Asymptotic depth `N`.
    pub depth: usize,
    pub kappa0: R,
    /// `kappa_2, ..., kappa_{N-1}`.
    pub kappa: Vec<R>,
    /// Sparse `xi_j`; missing entries are zero.
    pub xi: BTreeMap<ModeIndex, R>,
}

impl<R: Real> ParametricFrequency<R> {
    pub fn new(depth: usize, kappa0: R, kappa: Vec<R>, xi: BTreeMap<ModeIndex, R>) -> Result<Self> {
        let expected = depth.saturating_sub(2);
        if kappa.len() != expected {
            return Err(Error::Config(format!("depth {depth} needs {expected} kappa_q coefficients, got {}", kappa.len())));
        }
        Ok(Self { depth, kappa0, kappa, xi })
    }

    pub fn omega(&self, j: ModeIndex) -> R {
        let xi = self.xi.get(&j).cloned().unwrap_or_else(R::zero);
        if j == 0 {
            return self.kappa0.clone() + xi;
        }
        let mut w = R::from_int(j * j) + self.kappa0.clone() + xi;
        let jr = R::from_int(j);
        let mut pow = jr.clone();
        for kq in &self.kappa {
            pow = pow * jr.clone();
            w = w + kq.clone() / pow.clone();
        }
        w
    }

    /// Membership in the parameter ball: `|kappa| <= 1/4` and `|xi_j| <j>^N <= 1/2`.
    pub fn is_valid(&self) -> bool {
        let quarter = 0.25;
        let ok_k = self.kappa0.to_f64().abs() <= quarter && self.kappa.iter().all(|k| k.to_f64().abs() <= quarter);
        let ok_xi = self
            .xi
            .iter()
            .all(|(j, x)| x.to_f64().abs() * crate::momentum::bracket(*j).powi(self.depth as i32) <= 0.5);
        ok_k && ok_xi
    }
}

/// How the frequency of each mode is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Serialize + serde::de::DeserializeOwned")]
pub enum FrequencyForm<R> {
    /// Explicit table; every mode in the window must be present.
    Explicit(BTreeMap<ModeIndex, R>),
    /// `j^2 + V_j`, missing `V_j` read as zero.
    QuadraticPlusPotential(BTreeMap<ModeIndex, R>),
    Parametric(ParametricFrequency<R>),
}

/// A frequency rule on the window `|j| <= window`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Serialize + serde::de::DeserializeOwned")]
pub struct FrequencyVector<R> {
    pub form: FrequencyForm<R>,
    pub window: i64,
}

impl<R: Real> FrequencyVector<R> {
    /// `omega_j = j^2` exactly.
    pub fn free(window: i64) -> Self {
        Self { form: FrequencyForm::QuadraticPlusPotential(BTreeMap::new()), window }
    }

    pub fn with_potential(potential: BTreeMap<ModeIndex, R>, window: i64) -> Self {
        Self { form: FrequencyForm::QuadraticPlusPotential(potential), window }
    }

    pub fn explicit(table: BTreeMap<ModeIndex, R>, window: i64) -> Self {
        Self { form: FrequencyForm::Explicit(table), window }
    }

    pub fn parametric(zeta: ParametricFrequency<R>, window: i64) -> Self {
        Self { form: FrequencyForm::Parametric(zeta), window }
    }

    pub fn omega(&self, j: ModeIndex) -> Result<R> {
        if j.abs() > self.window {
            return Err(Error::Window { j, window: self.window });
        }
        Ok(match &self.form {
            FrequencyForm::Explicit(t) => t.get(&j).cloned().ok_or(Error::Window { j, window: self.window })?,
            FrequencyForm::QuadraticPlusPotential(v) => R::from_int(j * j) + v.get(&j).cloned().unwrap_or_else(R::zero),
            FrequencyForm::Parametric(z) => z.omega(j),
        })
    }

    /// `omega . nu`.
    pub fn dot(&self, nu: &SparseMomentum) -> Result<R> {
        let mut acc = R::zero();
        for &(i, c) in nu.entries() {
            acc = acc + self.omega(i)? * R::from_int(c);
        }
        Ok(acc)
    }

    /// Admissibility `|omega_j - j^2| <= 1/2` on the whole window.
    pub fn is_admissible(&self) -> bool {
        let half = R::from_ratio(1, 2);
        (-self.window..=self.window).all(|j| match self.omega(j) {
            Ok(w) => (w - R::from_int(j * j)).abs_val() <= half,
            Err(_) => false,
        })
    }

    /// Float copy of the frequencies on the window, indexed by `j + window`.
    pub fn to_f64_table(&self) -> Result<Vec<f64>> {
        (-self.window..=self.window).map(|j| self.omega(j).map(|w| w.to_f64())).collect()
    }

    pub fn map_real<S: Real>(&self, f: impl Fn(&R) -> S) -> FrequencyVector<S> {
        let map_table = |t: &BTreeMap<ModeIndex, R>| t.iter().map(|(k, v)| (*k, f(v))).collect::<BTreeMap<_, _>>();
        let form = match &self.form {
            FrequencyForm::Explicit(t) => FrequencyForm::Explicit(map_table(t)),
            FrequencyForm::QuadraticPlusPotential(t) => FrequencyForm::QuadraticPlusPotential(map_table(t)),
            FrequencyForm::Parametric(z) => FrequencyForm::Parametric(ParametricFrequency {
                depth: z.depth,
                kappa0: f(&z.kappa0),
                kappa: z.kappa.iter().map(&f).collect(),
                xi: map_table(&z.xi),
            }),
        };
        FrequencyVector { form, window: self.window }
    }
}

/// Small divisor `omega . nu - omega_j`.
pub fn small_divisor<R: Real>(omega: &FrequencyVector<R>, j: ModeIndex, nu: &SparseMomentum) -> Result<R> {
    Ok(omega.dot(nu)? - omega.omega(j)?)
}

/// Diophantine parameters `gamma in (0,1)`, `tau > 1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineParams {
    pub gamma: f64,
    pub tau: f64,
}

impl DiophantineParams {
    pub fn new(gamma: f64, tau: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) || tau <= 0.5 {
            return Err(Error::Config(format!("need 0 <= gamma < 1 and tau > 1/2, got gamma={gamma}, tau={tau}")));
        }
        Ok(Self { gamma, tau })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn e(j: i64) -> SparseMomentum {
        SparseMomentum::basis(j)
    }

    #[test]
    fn divisor_examples() {
        let w = FrequencyVector::<f64>::free(10);
        let nu = e(1).sub(&e(-1)).add(&e(0));
        assert_eq!(small_divisor(&w, 0, &nu).unwrap(), 0.0);
        assert_eq!(small_divisor(&w, 1, &e(1)).unwrap(), 0.0);
        let v = BTreeMap::from([(1, Rational::from_ratio(3, 10)), (-1, Rational::from_ratio(1, 10))]);
        let w = FrequencyVector::with_potential(v, 10);
        assert_eq!(small_divisor(&w, 0, &nu).unwrap(), Rational::from_ratio(1, 5));
        assert!(matches!(small_divisor(&w, 11, &e(0)), Err(Error::Window { .. })));
    }

    #[test]
    fn parametric_examples() {
        let z = ParametricFrequency::new(1, 0.1, vec![], BTreeMap::new()).unwrap();
        assert!((z.omega(3) - 9.1).abs() < 1e-15);
        let z = ParametricFrequency::new(3, 0.0, vec![0.2], BTreeMap::from([(2, 0.01), (0, 0.03)])).unwrap();
        assert!((z.omega(2) - (4.0 + 0.05 + 0.01)).abs() < 1e-15);
        assert!((z.omega(0) - 0.03).abs() < 1e-15);
        assert!(ParametricFrequency::new(3, 0.0, vec![], BTreeMap::<i64, f64>::new()).is_err());
    }

    #[test]
    fn admissibility() {
        let w = FrequencyVector::with_potential(BTreeMap::from([(2, 0.4)]), 5);
        assert!(w.is_admissible());
        let w = FrequencyVector::with_potential(BTreeMap::from([(2, 0.6)]), 5);
        assert!(!w.is_admissible());
    }
}
