//! Monte-Carlo estimates of the fraction of potentials failing a Diophantine bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use super::search::{diophantine_margin, SearchBudget};
use super::DiophantineParams;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::momentum::bracket;

/// Failure fraction with a 95% Clopper-Pearson interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub gamma: f64,
    pub failures: u64,
    pub samples: u64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Samples whose lattice scan hit the node cap.
    pub uncertified: u64,
    pub seed: u64,
}

/// Estimates over several `gamma` on one shared sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSweep {
    pub estimates: Vec<MeasureEstimate>,
    /// `fraction / gamma` per entry.
    pub slopes: Vec<f64>,
    /// Ratio of largest to smallest positive slope.
    pub slope_spread: f64,
}

fn clopper_pearson(k: u64, n: u64) -> (f64, f64) {
    let alpha = 0.05;
    let (kf, nf) = (k as f64, n as f64);
    let low = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0).map(|b| b.inverse_cdf(alpha / 2.0)).unwrap_or(0.0)
    };
    let high = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf).map(|b| b.inverse_cdf(1.0 - alpha / 2.0)).unwrap_or(1.0)
    };
    (low, high)
}

/// Frequencies `j^2 + V_j` of sample `index`, `V_j` uniform on `|V_j| <= <j>^{-depth} / 4`.
pub fn sample_frequencies(seed: u64, index: u64, depth: u32, window: i64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (-window..=window)
        .map(|j| {
            let half_width = bracket(j).powi(-(depth as i32)) / 4.0;
            (j * j) as f64 + rng.random_range(-half_width..=half_width)
        })
        .collect()
}

/// Settings shared by all `gamma` of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub tau: f64,
    pub depth: u32,
    pub window: i64,
    pub alpha: f64,
    pub budget: SearchBudget,
    pub samples: u64,
    pub seed: u64,
}

/// Runs one lattice scan per sample and thresholds it at every `gamma`.
pub fn measure_sweep(gammas: &[f64], cfg: &MeasureConfig, exec: Exec) -> Result<MeasureSweep> {
    if cfg.samples == 0 {
        return Err(Error::Precondition("sample count must be at least 1".into()));
    }
    for g in gammas {
        DiophantineParams::new(*g, cfg.tau)?;
    }
    let ceiling = gammas.iter().copied().fold(0.0, f64::max);
    let margins = exec.map_range(cfg.samples as usize, |i| {
        let table = sample_frequencies(cfg.seed, i as u64, cfg.depth, cfg.window);
        diophantine_margin(&table, cfg.window, cfg.tau, cfg.alpha, cfg.budget, ceiling, false)
    });
    let uncertified = margins.iter().filter(|m| !m.certified).count() as u64;
    let estimates: Vec<MeasureEstimate> = gammas
        .iter()
        .map(|&gamma| {
            let failures = if gamma == 0.0 {
                margins.iter().filter(|m| m.value == 0.0).count()
            } else {
                margins.iter().filter(|m| m.value <= gamma).count()
            } as u64;
            let (ci_low, ci_high) = clopper_pearson(failures, cfg.samples);
            MeasureEstimate {
                gamma,
                failures,
                samples: cfg.samples,
                fraction: failures as f64 / cfg.samples as f64,
                ci_low,
                ci_high,
                uncertified,
                seed: cfg.seed,
            }
        })
        .collect();
    let slopes: Vec<f64> =
        estimates.iter().map(|e| if e.gamma > 0.0 { e.fraction / e.gamma } else { 0.0 }).collect();
    let positive: Vec<f64> = slopes.iter().copied().filter(|s| *s > 0.0).collect();
    let slope_spread = if positive.is_empty() {
        1.0
    } else {
        positive.iter().copied().fold(0.0, f64::max) / positive.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(MeasureSweep { estimates, slopes, slope_spread })
}

/// Single-`gamma` estimate.
pub fn measure_sample(params: DiophantineParams, cfg: &MeasureConfig, exec: Exec) -> Result<MeasureEstimate> {
    let cfg = MeasureConfig { tau: params.tau, ..cfg.clone() };
    Ok(measure_sweep(&[params.gamma], &cfg, exec)?.estimates.remove(0))
}
