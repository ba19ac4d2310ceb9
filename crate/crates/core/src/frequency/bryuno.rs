//! Partial sums of the Bryuno series along a radius schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radii `r_0 < r_1 < ...` with `r_0 >= 1`, and the lattice exponent `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BryunoSchedule {
    pub radii: Vec<f64>,
    pub alpha: f64,
}

impl BryunoSchedule {
    pub fn new(radii: Vec<f64>, alpha: f64) -> Result<Self> {
        if radii.len() < 2 || radii[0] < 1.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("schedule needs r_0 >= 1 and a strictly increasing sequence of length >= 2".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(Self { radii, alpha })
    }

    /// `r_m = 2^m` for `m = 0..=terms`.
    pub fn dyadic(terms: usize, alpha: f64) -> Result<Self> {
        Self::new((0..=terms).map(|m| 2f64.powi(m as i32)).collect(), alpha)
    }

    /// Number of summed terms.
    pub fn terms(&self) -> usize {
        self.radii.len() - 1
    }
}

/// `sum_{m=1}^{M} log(1 / beta(r_m)) / r_{m-1}`; `beta_at_radius[m]` holds `beta(r_m)`.
///
/// An infinite `beta` (empty lattice) contributes nothing.
pub fn bryuno_sum(beta_at_radius: &[f64], schedule: &BryunoSchedule) -> Result<f64> {
    let m_max = schedule.terms();
    if beta_at_radius.len() < m_max + 1 {
        return Err(Error::Precondition(format!("need {} beta values, got {}", m_max + 1, beta_at_radius.len())));
    }
    let mut total = 0.0;
    for (m, &b) in beta_at_radius.iter().enumerate().take(m_max + 1).skip(1) {
        if !(b > 0.0) {
            return Err(Error::Resonance(format!("beta(r_{m}) = {b}")));
        }
        if b.is_finite() {
            total += (1.0 / b).ln() / schedule.radii[m - 1];
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_example() {
        let s = BryunoSchedule::dyadic(10, 0.5).unwrap();
        let v = bryuno_sum(&[0.5; 11], &s).unwrap();
        let expect: f64 = (1..=10).map(|m| 2f64.ln() * 2f64.powi(1 - m)).sum();
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn resonance_and_single_term() {
        let s = BryunoSchedule::dyadic(3, 0.5).unwrap();
        assert!(matches!(bryuno_sum(&[1.0, 0.5, 0.0, 0.1], &s), Err(Error::Resonance(_))));
        let s = BryunoSchedule::new(vec![1.0, 2.0], 0.5).unwrap();
        assert!((bryuno_sum(&[1.0, (-1.0f64).exp()], &s).unwrap() - 1.0).abs() < 1e-15);
    }
}
