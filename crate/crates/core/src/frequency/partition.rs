//! Scale sequences and the smooth partition of unity built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `exp(-1/t)` for `t > 0`, zero otherwise.
pub fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Even non-increasing cutoff: one on `|x| <= 1/2`, zero on `|x| >= 1`.
pub fn cutoff(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.5 {
        return 1.0;
    }
    if a >= 1.0 {
        return 0.0;
    }
    let inner = bump(1.0 - a);
    inner / (inner + bump(a - 0.5))
}

/// Scales `m_n` with `beta(m_{n+1}) <= beta(m_n) / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSequence {
    pub m: Vec<usize>,
    pub beta: Vec<f64>,
    /// True when the data ran out before `beta` halved again.
    pub truncated: bool,
}

impl ScaleSequence {
    /// Builds a sequence directly from scale values; each must be below half the previous one.
    pub fn from_values(m: Vec<usize>, beta: Vec<f64>) -> Result<Self> {
        if m.len() != beta.len() || m.is_empty() {
            return Err(Error::Config("scale labels and values must be non-empty and of equal length".into()));
        }
        if beta.iter().any(|b| !(*b > 0.0)) || beta.windows(2).any(|w| 2.0 * w[1] > w[0]) {
            return Err(Error::Config("scale values must be positive and halve at every step".into()));
        }
        Ok(Self { m, beta, truncated: false })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Scans `beta(m)` for `m = 0, 1, ...` and keeps every first halving.
pub fn build_scale_sequence(beta: &[f64]) -> Result<ScaleSequence> {
    if beta.is_empty() {
        return Err(Error::Precondition("empty beta table".into()));
    }
    if beta.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Resonance("non-positive beta value".into()));
    }
    if beta.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Precondition("beta table must be non-increasing".into()));
    }
    let mut m = vec![0usize];
    let mut values = vec![beta[0]];
    let mut current = beta[0];
    for (idx, b) in beta.iter().enumerate().skip(1) {
        if *b <= current / 2.0 {
            m.push(idx);
            values.push(*b);
            current = *b;
        }
    }
    let truncated = *beta.last().unwrap() > current / 2.0;
    Ok(ScaleSequence { m, beta: values, truncated })
}

/// Partition `sum_n Psi_n = 1` away from zero, `Psi_n = chi_{n-1} - chi_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub scales: ScaleSequence,
}

impl PartitionOfUnity {
    pub fn new(scales: ScaleSequence) -> Self {
        Self { scales }
    }

    pub fn scale_count(&self) -> usize {
        self.scales.len()
    }

    /// `chi_n(x) = chi(8 x / beta(m_n))`, with `chi_{-1} = 1`.
    pub fn chi(&self, n: isize, x: f64) -> f64 {
        if n < 0 {
            return 1.0;
        }
        match self.scales.beta.get(n as usize) {
            Some(b) => cutoff(8.0 * x / b),
            None => 0.0,
        }
    }

    pub fn psi(&self, n: usize, x: f64) -> f64 {
        self.chi(n as isize - 1, x) - self.chi(n as isize, x)
    }

    /// `Psi_n(x) / x`, and one at `x = 0`.
    pub fn propagator(&self, n: usize, x: f64) -> f64 {
        if x == 0.0 {
            1.0
        } else {
            self.psi(n, x) / x
        }
    }

    /// Scale carrying the largest `Psi_n(x)`; ties go to the smaller index.
    pub fn label(&self, x: f64) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for n in 0..self.scale_count() {
            let p = self.psi(n, x);
            if p > best.1 {
                best = (n, p);
            }
        }
        best.0
    }

    /// Smallest `|x|` on which the partition sums to one over the stored scales.
    pub fn exact_threshold(&self) -> f64 {
        self.scales.beta.last().copied().unwrap_or(0.0) / 8.0
    }

    /// Open interval outside which `Psi_n` vanishes.
    pub fn support(&self, n: usize) -> (f64, f64) {
        let lo = self.scales.beta[n] / 16.0;
        let hi = if n == 0 { f64::INFINITY } else { self.scales.beta[n - 1] / 8.0 };
        (lo, hi)
    }
}
