//! Large-`j` behaviour of the counterterms: profiles, inverse-power fits, the constant term
//! against the quartic average, the frequency-potential fixed point and Lipschitz extension.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frequency::{FrequencyVector, ParametricFrequency};
use crate::lindstedt::{first_order_counterterms, AmplitudeConfig, CoefficientTable, Engine, EngineSettings};
use crate::momentum::{bracket, ModeIndex, SparseMomentum};
use crate::scalar::{Coeff, Cx, Real};

/// Largest accepted condition number of the column-scaled fit matrix.
pub const FIT_CONDITION_LIMIT: f64 = 1e12;

/// `eta^(k)_j` for `k = 1..=order` on a list of probe modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountertermProfile {
    pub modes: Vec<ModeIndex>,
    pub order: usize,
    pub eps: f64,
    /// `eta[k - 1][i]` is `eta^(k)` at `modes[i]`.
    pub eta: Vec<Vec<f64>>,
    /// Largest imaginary part discarded when dividing by `c_j`.
    pub max_imag: f64,
}

impl CountertermProfile {
    /// `sum_k eps^k eta^(k)_j` per probe mode.
    pub fn total(&self) -> Vec<f64> {
        (0..self.modes.len())
            .map(|i| self.eta.iter().enumerate().map(|(k, row)| self.eps.powi(k as i32 + 1) * row[i]).sum())
            .collect()
    }

    /// Rows `j,k,eta` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,k,eta\n");
        for (k, row) in self.eta.iter().enumerate() {
            for (j, v) in self.modes.iter().zip(row) {
                out.push_str(&format!("{j},{},{v:e}\n", k + 1));
            }
        }
        out
    }
}

/// Frequency window covering every mode reached by a run at `order` with a probe at `probe`.
pub fn reach_window<R: Real>(amplitudes: &AmplitudeConfig<R>, probe: ModeIndex, order: usize) -> i64 {
    let m = amplitudes.support().iter().map(|j| j.abs()).max().unwrap_or(0);
    (4 * order as i64 + 1) * (probe.abs() + m)
}

/// Counterterms through `order` under the parametric frequencies `zeta`, parallel over probes.
pub fn counterterm_profile<R: Real>(
    amplitudes: &AmplitudeConfig<R>,
    zeta: &ParametricFrequency<R>,
    eps: f64,
    modes: &[ModeIndex],
    order: usize,
    settings: EngineSettings,
) -> Result<CountertermProfile> {
    if order == 0 {
        return Err(Error::Config("profile order must be at least one".into()));
    }
    let far = modes.iter().map(|j| j.abs()).max().unwrap_or(0);
    let omega = FrequencyVector::parametric(zeta.clone(), reach_window(amplitudes, far, order));
    let inner = EngineSettings { order, exec: Exec::Sequential, ..settings };
    let rows: Vec<Result<(Vec<f64>, f64)>> = settings.exec.map(modes, |&j| {
        if order == 1 {
            let eta = first_order_counterterms(amplitudes, &[j], Exec::Sequential)?;
            return Ok((vec![eta[&j].to_f64()], 0.0));
        }
        let mut engine = Engine::run(amplitudes, &omega, inner)?;
        let values = (1..=order).map(|k| engine.eta(k, j).map(|v| v.to_f64())).collect::<Result<Vec<_>>>()?;
        Ok((values, engine.max_eta_imag()))
    });
    let mut eta = vec![Vec::with_capacity(modes.len()); order];
    let mut max_imag: f64 = 0.0;
    for row in rows {
        let (values, imag) = row?;
        max_imag = max_imag.max(imag);
        for (k, v) in values.into_iter().enumerate() {
            eta[k].push(v);
        }
    }
    Ok(CountertermProfile { modes: modes.to_vec(), order, eps, eta, max_imag })
}

/// Fit on the window `start <= |j| <= 2 start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub start: ModeIndex,
    pub a0: f64,
    pub a1: f64,
}

/// Weighted least-squares fit of `sum_{q < N} a_q / j^q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub depth: usize,
    /// `a_0, ..., a_{N-1}`.
    pub coefficients: Vec<f64>,
    /// Fitted `a_1`; zero when `N < 2`.
    pub a1: f64,
    /// `eta_j - sum_q a_q / j^q` per mode.
    pub remainder: Vec<(ModeIndex, f64)>,
    /// `max |remainder_j| <j>^N`.
    pub scaled_remainder_max: f64,
    pub condition_number: f64,
    /// Fits on sliding windows, by increasing start.
    pub windows: Vec<WindowFit>,
}

impl AsymptoticFit {
    /// `sum_q a_q / j^q`.
    pub fn model(&self, j: ModeIndex) -> f64 {
        let x = 1.0 / j as f64;
        self.coefficients.iter().rev().fold(0.0, |acc, a| acc * x + a)
    }
}

fn solve_weighted(modes: &[ModeIndex], values: &[f64], depth: usize) -> Result<(Vec<f64>, f64)> {
    let rows = modes.len();
    let mut a = DMatrix::<f64>::zeros(rows, depth);
    let mut b = DVector::<f64>::zeros(rows);
    for (r, (&j, &v)) in modes.iter().zip(values).enumerate() {
        let w = bracket(j).powi(depth as i32);
        for q in 0..depth {
            a[(r, q)] = w / (j as f64).powi(q as i32);
        }
        b[r] = w * v;
    }
    let scales: Vec<f64> = (0..depth).map(|q| a.column(q).norm()).collect();
    if scales.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return Err(Error::IllConditioned("degenerate basis column".into()));
    }
    for (q, s) in scales.iter().enumerate() {
        a.column_mut(q).scale_mut(1.0 / s);
    }
    let svd = a.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > FIT_CONDITION_LIMIT {
        return Err(Error::IllConditioned(format!("condition number {condition:e}; widen the probe window")));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
    Ok(((0..depth).map(|q| x[q] / scales[q]).collect(), condition))
}

/// Fits `values` on `modes` with weights `<j>^N` and adds sliding-window fits.
pub fn fit_inverse_powers(modes: &[ModeIndex], values: &[f64], depth: usize) -> Result<AsymptoticFit> {
    if depth == 0 {
        return Err(Error::Config("fit depth must be at least one".into()));
    }
    if modes.len() != values.len() {
        return Err(Error::Config("modes and values differ in length".into()));
    }
    if modes.contains(&0) {
        return Err(Error::Config("probe modes must be nonzero".into()));
    }
    let distinct: BTreeSet<i64> = modes.iter().map(|j| j.abs()).collect();
    if distinct.len() < depth + 2 {
        return Err(Error::IllConditioned(format!("{} distinct |j| for depth {depth}; need {}", distinct.len(), depth + 2)));
    }
    let (coefficients, condition_number) = solve_weighted(modes, values, depth)?;
    let mut fit = AsymptoticFit {
        depth,
        a1: coefficients.get(1).copied().unwrap_or(0.0),
        coefficients,
        remainder: Vec::new(),
        scaled_remainder_max: 0.0,
        condition_number,
        windows: Vec::new(),
    };
    fit.remainder = modes.iter().zip(values).map(|(&j, &v)| (j, v - fit.model(j))).collect();
    fit.scaled_remainder_max =
        fit.remainder.iter().map(|(j, r)| r.abs() * bracket(*j).powi(depth as i32)).fold(0.0, f64::max);
    for &start in &distinct {
        let (js, vs): (Vec<i64>, Vec<f64>) =
            modes.iter().zip(values).filter(|(j, _)| j.abs() >= start && j.abs() <= 2 * start).map(|(j, v)| (*j, *v)).unzip();
        let spread: BTreeSet<i64> = js.iter().map(|j| j.abs()).collect();
        if spread.len() < depth + 2 {
            continue;
        }
        if let Ok((c, _)) = solve_weighted(&js, &vs, depth) {
            fit.windows.push(WindowFit { start, a0: c[0], a1: c.get(1).copied().unwrap_or(0.0) });
        }
    }
    Ok(fit)
}

/// `<|U|^4>` order by order: the coefficient of `eps^m` for `m = 0..=max_order`, summed over
/// `nu_1 - nu_2 + nu_3 - nu_4 = 0`.
pub fn quartic_average<R: Real>(table: &CoefficientTable<R>, max_order: usize) -> Vec<Cx<R>> {
    let top = max_order.min(table.max_order());
    // pairs[k][mu] = sum_{k1 + k2 = k} sum_{nu1 - nu2 = mu} u_{nu1} conj(u_{nu2}).
    let mut pairs: Vec<BTreeMap<SparseMomentum, Cx<R>>> = vec![BTreeMap::new(); top + 1];
    for k1 in 0..=top {
        for k2 in 0..=top - k1 {
            for (n1, u1) in &table.orders[k1] {
                for (n2, u2) in &table.orders[k2] {
                    let p = u1.mul_ref(&Coeff::<R>::conj(u2));
                    pairs[k1 + k2].entry(n1.sub(n2)).or_insert_with(Coeff::<R>::zero).add_assign_ref(&p);
                }
            }
        }
    }
    (0..=max_order)
        .map(|m| {
            let mut acc: Cx<R> = Coeff::<R>::zero();
            for ka in 0..=m.min(top) {
                let kb = m - ka;
                if kb > top {
                    continue;
                }
                for (mu, p) in &pairs[ka] {
                    if let Some(r) = pairs[kb].get(mu) {
                        acc.add_assign_ref(&p.mul_ref(&Coeff::<R>::conj(r)));
                    }
                }
            }
            acc
        })
        .collect()
}

/// Constant term of the counterterm tail against `-3 eps <|U|^4>`, order by order in `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A0Check {
    pub order: usize,
    pub eps: f64,
    /// Coefficient of `eps^k` in `-3 eps <|U|^4>`, `k = 1..=order`.
    pub predicted_by_order: Vec<f64>,
    /// Fitted `a_0` of `eta^(k)`, `k = 1..=order`.
    pub fitted_by_order: Vec<f64>,
    pub deviation_by_order: Vec<f64>,
    pub predicted: f64,
    pub fitted: f64,
    /// `|fitted - predicted| / |predicted|`.
    pub relative_deviation: f64,
}

/// Compares fitted `a_0` on `probe` with `-3 eps <|U|^4>` truncated at `eps^order`.
pub fn check_a0<R: Real>(
    amplitudes: &AmplitudeConfig<R>,
    zeta: &ParametricFrequency<R>,
    eps: f64,
    order: usize,
    probe: &[ModeIndex],
    depth: usize,
    settings: EngineSettings,
) -> Result<A0Check> {
    let profile = counterterm_profile(amplitudes, zeta, eps, probe, order, settings)?;
    let omega = FrequencyVector::parametric(zeta.clone(), reach_window(amplitudes, 0, order));
    let engine = Engine::run(amplitudes, &omega, EngineSettings { order: order - 1, ..settings })?;
    let average = quartic_average(&engine.coefficients(), order - 1);
    let predicted_by_order: Vec<f64> = average.iter().map(|a| -3.0 * a.re.to_f64()).collect();
    let fitted_by_order = profile
        .eta
        .iter()
        .map(|row| fit_inverse_powers(probe, row, depth).map(|f| f.coefficients[0]))
        .collect::<Result<Vec<f64>>>()?;
    let deviation_by_order: Vec<f64> = predicted_by_order.iter().zip(&fitted_by_order).map(|(p, f)| (p - f).abs()).collect();
    let series = |v: &[f64]| v.iter().enumerate().map(|(k, a)| eps.powi(k as i32 + 1) * a).sum::<f64>();
    let (predicted, fitted) = (series(&predicted_by_order), series(&fitted_by_order));
    let relative_deviation = if predicted == 0.0 { (fitted - predicted).abs() } else { (fitted - predicted).abs() / predicted.abs() };
    Ok(A0Check { order, eps, predicted_by_order, fitted_by_order, deviation_by_order, predicted, fitted, relative_deviation })
}

/// Settings of the frequency-potential fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilitySettings {
    /// Asymptotic depth `N`.
    pub depth: usize,
    /// Lindstedt order `K` of the counterterms.
    pub order: usize,
    pub eps: f64,
    /// Modes `|j| <= window` on which the identity is imposed.
    pub window: i64,
    /// Smallest `|j|` used by the tail fit.
    pub fit_start: i64,
    pub max_iter: usize,
    pub tol: f64,
    pub engine: EngineSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Largest change of `kappa` or `xi` from the previous iterate.
    pub step: f64,
    /// `max |omega_j + eta_j - j^2 - V_j|` on the window.
    pub residual: f64,
    pub contraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub zeta: ParametricFrequency<f64>,
    pub omega: BTreeMap<ModeIndex, f64>,
    pub eta: BTreeMap<ModeIndex, f64>,
    pub trace: Vec<IterationRecord>,
    pub residual: f64,
    pub converged: bool,
    pub max_contraction: f64,
    /// `sup |xi_j - V_j| <j>^N`.
    pub xi_shift: f64,
}

fn weighted_sup(values: impl Iterator<Item = (ModeIndex, f64)>, depth: usize) -> f64 {
    values.map(|(j, v)| v.abs() * bracket(j).powi(depth as i32)).fold(0.0, f64::max)
}

/// Picard iteration for `omega_j(zeta) + eta_j(omega(zeta)) = j^2 + V_j` on the window, with
/// the tail split into `a_q / j^q` and a remainder by [`fit_inverse_powers`].
pub fn solve_compatibility(
    potential: &BTreeMap<ModeIndex, f64>,
    amplitudes: &AmplitudeConfig<f64>,
    s: &CompatibilitySettings,
) -> Result<CompatibilityReport> {
    let n = s.depth;
    let v = |j: ModeIndex| potential.get(&j).copied().unwrap_or(0.0);
    let norm_v = weighted_sup(potential.iter().map(|(j, x)| (*j, *x)), n);
    if norm_v > 0.25 {
        return Err(Error::Config(format!("potential norm {norm_v} exceeds 1/4")));
    }
    let modes: Vec<ModeIndex> = (-s.window..=s.window).collect();
    let tail: Vec<ModeIndex> = modes.iter().copied().filter(|j| j.abs() >= s.fit_start.max(1)).collect();
    let mut zeta = ParametricFrequency::new(n, 0.0, vec![0.0; n.saturating_sub(2)], modes.iter().map(|&j| (j, v(j))).collect())?;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut growing = 0;
    for iteration in 0..=s.max_iter {
        let eta: Vec<f64> = if s.eps == 0.0 {
            vec![0.0; modes.len()]
        } else {
            counterterm_profile(amplitudes, &zeta, s.eps, &modes, s.order, s.engine)?.total()
        };
        let residual = modes
            .iter()
            .zip(&eta)
            .map(|(&j, e)| (zeta.omega(j) + e - (j * j) as f64 - v(j)).abs())
            .fold(0.0, f64::max);
        if let Some(last) = trace.last_mut() {
            last.residual = residual;
        } else {
            trace.push(IterationRecord { iteration: 0, step: 0.0, residual, contraction: None });
        }
        if residual <= s.tol {
            let max_contraction = trace.iter().filter_map(|r| r.contraction).fold(0.0, f64::max);
            return Ok(CompatibilityReport {
                omega: modes.iter().map(|&j| (j, zeta.omega(j))).collect(),
                eta: modes.iter().copied().zip(eta).collect(),
                xi_shift: weighted_sup(modes.iter().map(|&j| (j, zeta.xi.get(&j).copied().unwrap_or(0.0) - v(j))), n),
                zeta,
                trace,
                residual,
                converged: true,
                max_contraction,
            });
        }
        if iteration == s.max_iter {
            break;
        }
        let next = picard_update(&modes, &eta, &tail, potential, n)?;
        let step = (next.kappa0 - zeta.kappa0)
            .abs()
            .max(next.kappa.iter().zip(&zeta.kappa).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .max(modes.iter().map(|j| (next.xi[j] - zeta.xi.get(j).copied().unwrap_or(0.0)).abs()).fold(0.0, f64::max));
        let previous = trace.last().map(|r| r.step).unwrap_or(0.0);
        let contraction = (previous > 0.0).then(|| step / previous);
        growing = if contraction.is_some_and(|c| c >= 1.0) { growing + 1 } else { 0 };
        trace.push(IterationRecord { iteration: iteration + 1, step, residual: f64::NAN, contraction });
        if growing >= 2 || !step.is_finite() {
            return Err(Error::NonContraction(trace_text(&trace)));
        }
        zeta = next;
    }
    Err(Error::NonContraction(format!("no convergence in {} iterations; {}", s.max_iter, trace_text(&trace))))
}

fn picard_update(
    modes: &[ModeIndex],
    eta: &[f64],
    tail: &[ModeIndex],
    potential: &BTreeMap<ModeIndex, f64>,
    n: usize,
) -> Result<ParametricFrequency<f64>> {
    let v = |j: ModeIndex| potential.get(&j).copied().unwrap_or(0.0);
    let by_mode: BTreeMap<ModeIndex, f64> = modes.iter().copied().zip(eta.iter().copied()).collect();
    if n == 0 {
        let xi = modes.iter().map(|&j| (j, v(j) - by_mode[&j])).collect();
        return ParametricFrequency::new(0, 0.0, Vec::new(), xi);
    }
    let values: Vec<f64> = tail.iter().map(|j| by_mode[j]).collect();
    let fit = fit_inverse_powers(tail, &values, n)?;
    let a = &fit.coefficients;
    // Everything the kappa terms do not absorb, including a_1 / j, goes into xi.
    let absorbed = |j: ModeIndex| {
        if j == 0 {
            return a[0];
        }
        a[0] + (2..n).map(|q| a[q] / (j as f64).powi(q as i32)).sum::<f64>()
    };
    let xi = modes.iter().map(|&j| (j, v(j) - (by_mode[&j] - absorbed(j)))).collect();
    ParametricFrequency::new(n, -a[0], (2..n).map(|q| -a[q]).collect(), xi)
}

fn trace_text(trace: &[IterationRecord]) -> String {
    trace
        .iter()
        .map(|r| format!("#{} step {:e} contraction {}", r.iteration, r.step, r.contraction.map_or("-".into(), |c| format!("{c:.3}"))))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Norm on the parameter space of a Lipschitz sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamNorm {
    Sup,
    Euclidean,
}

impl ParamNorm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            ParamNorm::Sup => diffs.fold(0.0, f64::max),
            ParamNorm::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        }
    }
}

/// Finite sample of a function on a normed space with a Lipschitz constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSample {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub lipschitz: f64,
    pub norm: ParamNorm,
}

impl LipschitzSample {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>, lipschitz: f64, norm: ParamNorm) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Config("points and values differ in length".into()));
        }
        if points.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::Config("sample points differ in dimension".into()));
        }
        if !(lipschitz >= 0.0) {
            return Err(Error::Config(format!("invalid Lipschitz constant {lipschitz}")));
        }
        Ok(Self { points, values, lipschitz, norm })
    }

    /// Smallest constant for which the sample is Lipschitz.
    pub fn empirical_constant(&self) -> f64 {
        let mut best: f64 = 0.0;
        for a in 0..self.points.len() {
            for b in a + 1..self.points.len() {
                let d = self.norm.distance(&self.points[a], &self.points[b]);
                let gap = (self.values[a] - self.values[b]).abs();
                if d > 0.0 {
                    best = best.max(gap / d);
                } else if gap > 0.0 {
                    return f64::INFINITY;
                }
            }
        }
        best
    }

    pub fn is_lipschitz(&self) -> bool {
        self.empirical_constant() <= self.lipschitz * (1.0 + 1e-12)
    }
}

/// `clamp(min_a f(a) + L |q - a|, [-M, M])` with `M = max |f|`.
pub fn mcshane_extend(sample: &LipschitzSample, query: &[f64]) -> Result<f64> {
    if sample.points.is_empty() {
        return Err(Error::Precondition("empty Lipschitz sample".into()));
    }
    if sample.points[0].len() != query.len() {
        return Err(Error::Config("query dimension differs from the sample".into()));
    }
    let bound = sample.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let inf = sample
        .points
        .iter()
        .zip(&sample.values)
        .map(|(a, f)| f + sample.lipschitz * sample.norm.distance(query, a))
        .fold(f64::INFINITY, f64::min);
    Ok(inf.clamp(-bound, bound))
}
