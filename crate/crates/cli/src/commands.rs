//! One function per subcommand; each returns the JSON result and whether its checks passed.

use std::fs;
use std::path::{Path, PathBuf};

use qnls_core::asymptotics::{check_a0, counterterm_profile, fit_inverse_powers, solve_compatibility, CompatibilitySettings};
use qnls_core::frequency::{
    beta, beta0, build_scale_sequence, bryuno_sum, diophantine_check, measure_sweep, BryunoSchedule, DiophantineParams,
    FrequencyVector, LatticeInfimum, MeasureConfig, ParametricFrequency, SearchBudget,
};
use qnls_core::lindstedt::{gevrey_norm, residual, AmplitudeConfig, Engine};
use qnls_core::oracles::default_suite;
use qnls_core::scalar::{modulus_f64, Rational, Real};
use qnls_core::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig};

/// Result of a command: payload and verdict of its invariant checks.
pub struct Outcome {
    pub result: Value,
    pub passed: bool,
}

/// Optional output directory for CSV and JSON artifacts.
pub struct Artifacts {
    dir: Option<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf) })
    }

    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let mut writer = csv::Writer::from_path(dir.join(name)).map_err(csv_error)?;
        for row in rows {
            writer.serialize(row).map_err(csv_error)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn text(&self, name: &str, body: &str) -> Result<()> {
        if let Some(dir) = &self.dir {
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Text form of a scalar: `p/q` for rationals, shortest round-trip for floats.
pub trait Render: Real {
    fn render(&self) -> String;
}

impl Render for f64 {
    fn render(&self) -> String {
        format!("{self:e}")
    }
}

impl Render for Rational {
    fn render(&self) -> String {
        self.to_string()
    }
}

fn float_amplitudes(cfg: &RunConfig) -> Result<AmplitudeConfig<f64>> {
    Ok(cfg.amplitudes()?.map_real(Real::to_f64))
}

fn float_zeta(zeta: &ParametricFrequency<Rational>) -> ParametricFrequency<f64> {
    let f = |x: &Rational| Real::to_f64(x);
    ParametricFrequency { depth: zeta.depth, kappa0: f(&zeta.kappa0), kappa: zeta.kappa.iter().map(f).collect(), xi: zeta.xi.iter().map(|(j, x)| (*j, f(x))).collect() }
}

#[derive(Serialize)]
struct CoefficientRow {
    k: usize,
    j: i64,
    nu: String,
    re: String,
    im: String,
}

#[derive(Serialize)]
struct CountertermRow {
    k: usize,
    j: i64,
    eta: String,
    extended: bool,
}

/// Engine run through `K`, structural checks and the residual report.
pub fn compute(cfg: &RunConfig, art: &Artifacts, residual_only: bool) -> Result<Outcome> {
    let amplitudes = cfg.amplitudes()?;
    let window = cfg.window_for(&amplitudes);
    let omega = cfg.frequencies(window)?;
    match cfg.mode {
        Mode::Rational => compute_in(cfg, art, residual_only, &amplitudes, &omega),
        Mode::Float => {
            let f = |x: &Rational| Real::to_f64(x);
            compute_in(cfg, art, residual_only, &amplitudes.map_real(f), &omega.map_real(f))
        }
    }
}

fn compute_in<R: Render>(
    cfg: &RunConfig,
    art: &Artifacts,
    residual_only: bool,
    amplitudes: &AmplitudeConfig<R>,
    omega: &FrequencyVector<R>,
) -> Result<Outcome> {
    let engine = Engine::run(amplitudes, omega, cfg.engine())?;
    let coefficients = engine.coefficients();
    let eta = engine.counterterms();
    let report = residual(&coefficients, eta, omega, cfg.order, cfg.exec())?;
    let exact = cfg.mode == Mode::Rational;
    let residual_ok = if exact {
        report.exact_zero.iter().all(|z| *z)
    } else {
        report.relative.iter().all(|r| *r <= cfg.residual_tol)
    };
    let verdict = match (exact, residual_ok) {
        (true, true) => "exact-zero",
        (false, true) => "within-tolerance",
        _ => "nonzero",
    };
    let residual_json = json!({ "verdict": verdict, "report": report });
    if residual_only {
        return Ok(Outcome { result: json!({ "mode": R::mode_name(), "window": omega.window, "residual": residual_json }), passed: residual_ok });
    }

    let key_laws = coefficients.check_key_laws();
    let norms: Vec<Value> = coefficients
        .orders
        .iter()
        .enumerate()
        .map(|(k, table)| {
            let sup = table.values().map(modulus_f64).fold(0.0, f64::max);
            json!({ "order": k, "entries": table.len(), "sup": sup })
        })
        .collect();
    let g = &cfg.gevrey;
    let gevrey = gevrey_norm(&coefficients, cfg.eps, g.s1, g.s2, g.alpha, 1);
    let eta_rows: Vec<CountertermRow> = eta
        .iter()
        .map(|(k, j, e)| CountertermRow { k, j, eta: e.value.render(), extended: e.extended })
        .collect();
    let eta_json: Vec<Value> = (1..eta.orders.len())
        .map(|k| {
            let row: serde_json::Map<String, Value> =
                eta.orders[k].iter().filter(|(_, e)| !e.extended).map(|(j, e)| (j.to_string(), Value::from(e.value.render()))).collect();
            json!({ "order": k, "support": row })
        })
        .collect();
    let coefficient_rows: Vec<CoefficientRow> = coefficients
        .iter()
        .map(|(k, j, nu, u)| CoefficientRow { k, j, nu: nu.to_text(), re: u.re.render(), im: u.im.render() })
        .collect();
    art.csv("coefficients.csv", &coefficient_rows)?;
    art.csv("counterterms.csv", &eta_rows)?;
    Ok(Outcome {
        result: json!({
            "mode": R::mode_name(),
            "window": omega.window,
            "support": amplitudes.support(),
            "eta": eta_json,
            "max_eta_imag": engine.max_eta_imag(),
            "norms": norms,
            "gevrey_norm": gevrey,
            "key_laws": key_laws,
            "residual": residual_json,
        }),
        passed: residual_ok && key_laws.passed(),
    })
}

#[derive(Serialize)]
struct BetaRow {
    m: usize,
    radius: f64,
    beta: f64,
    certified: bool,
    nodes: u64,
    witness: String,
}

/// Lattice infima along the schedule, partial Bryuno sums, scales and a Diophantine scan.
pub fn bryuno(cfg: &RunConfig, art: &Artifacts) -> Result<Outcome> {
    let spec = &cfg.bryuno;
    let window = cfg.window.unwrap_or(8);
    let omega = cfg.frequencies(window)?.map_real(Real::to_f64);
    let schedule = if spec.radii.is_empty() {
        BryunoSchedule::dyadic(spec.terms, spec.alpha)?
    } else {
        BryunoSchedule::new(spec.radii.clone(), spec.alpha)?
    };
    let infimum = |x: f64| -> Result<LatticeInfimum> {
        let budget = SearchBudget::new(x, spec.max_nodes);
        if spec.zero_charge {
            beta0(&omega, x, spec.alpha, budget)
        } else {
            beta(&omega, x, spec.alpha, budget)
        }
    };
    let scans = schedule.radii.iter().map(|&r| infimum(r)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<BetaRow> = scans
        .iter()
        .zip(&schedule.radii)
        .enumerate()
        .map(|(m, (s, r))| BetaRow {
            m,
            radius: *r,
            beta: s.value,
            certified: s.certified,
            nodes: s.nodes,
            witness: s.witness.as_ref().map(|w| w.to_text()).unwrap_or_default(),
        })
        .collect();
    art.csv("beta.csv", &rows)?;
    let resonance = scans.iter().find(|s| s.value == 0.0);
    let betas: Vec<f64> = scans.iter().map(|s| s.value).collect();

    let (partial_sums, scales, diophantine) = if resonance.is_some() {
        (Value::Null, Value::Null, Value::Null)
    } else {
        let sums = (1..=schedule.terms())
            .map(|m| {
                let prefix = BryunoSchedule::new(schedule.radii[..=m].to_vec(), schedule.alpha)?;
                bryuno_sum(&betas[..=m], &prefix)
            })
            .collect::<Result<Vec<f64>>>()?;
        let table = (1..=spec.scale_radius.max(1)).map(|x| infimum(x as f64).map(|s| s.value)).collect::<Result<Vec<f64>>>()?;
        // Small radii may hold an empty lattice; scales start at the first finite value.
        let scales = match table.iter().position(|b| b.is_finite()) {
            None => Value::Null,
            Some(first) => {
                let seq = build_scale_sequence(&table[first..])?;
                let radius: Vec<usize> = seq.m.iter().map(|m| m + first + 1).collect();
                json!({ "radius": radius, "beta": seq.beta, "truncated": seq.truncated })
            }
        };
        let params = DiophantineParams::new(spec.gamma, spec.tau)?;
        let last = *schedule.radii.last().unwrap_or(&1.0);
        let verdict = diophantine_check(&omega, params, spec.alpha, SearchBudget::new(last, spec.max_nodes), spec.zero_charge)?;
        (json!(sums), scales, serde_json::to_value(verdict)?)
    };
    let verdict = match (&resonance, diophantine.get("holds"), diophantine.get("exhausted")) {
        (Some(_), _, _) => "resonant",
        (None, Some(Value::Bool(false)), _) => "not-diophantine",
        (None, Some(Value::Bool(true)), Some(Value::Bool(true))) => "diophantine",
        _ => "inconclusive",
    };
    Ok(Outcome {
        result: json!({
            "window": window,
            "schedule": schedule,
            "verdict": verdict,
            "witness": resonance.and_then(|s| s.witness.as_ref()).map(|w| w.to_text()),
            "beta": rows.iter().map(|r| r.beta).collect::<Vec<_>>(),
            "bryuno_partial_sums": partial_sums,
            "scales": scales,
            "diophantine": diophantine,
        }),
        passed: true,
    })
}

#[derive(Serialize)]
struct WindowRow {
    start: i64,
    a0: f64,
    a1: f64,
}

/// Counterterm tail profile, inverse-power fit and the constant-term check.
pub fn asympt(cfg: &RunConfig, art: &Artifacts) -> Result<Outcome> {
    let spec = &cfg.asympt;
    if cfg.order == 0 {
        return Err(Error::Config("asympt needs order >= 1".into()));
    }
    let amplitudes = float_amplitudes(cfg)?;
    let zeta = float_zeta(&cfg.parametric()?);
    let probe: Vec<i64> = (spec.probe_start..=spec.probe_end).filter(|j| *j != 0).collect();
    let profile = counterterm_profile(&amplitudes, &zeta, cfg.eps, &probe, cfg.order, cfg.engine())?;
    art.text("profile.csv", &profile.to_csv())?;
    let fit = fit_inverse_powers(&probe, &profile.total(), spec.depth)?;
    let windows: Vec<WindowRow> = fit.windows.iter().map(|w| WindowRow { start: w.start, a0: w.a0, a1: w.a1 }).collect();
    art.csv("fit_windows.csv", &windows)?;
    let a0 = check_a0(&amplitudes, &zeta, cfg.eps, cfg.order, &probe, spec.depth, cfg.engine())?;
    Ok(Outcome {
        result: json!({
            "probe": [spec.probe_start, spec.probe_end],
            "a0": fit.coefficients[0],
            "a1": fit.a1,
            "coefficients": fit.coefficients,
            "scaled_remainder_max": fit.scaled_remainder_max,
            "condition_number": fit.condition_number,
            "a0_check": a0,
            "max_imag": profile.max_imag,
        }),
        passed: true,
    })
}

/// Fixed point of the frequency-potential system.
pub fn compat(cfg: &RunConfig, art: &Artifacts) -> Result<Outcome> {
    let spec = &cfg.compat;
    let settings = CompatibilitySettings {
        depth: spec.depth,
        order: cfg.order,
        eps: cfg.eps,
        window: spec.window,
        fit_start: spec.fit_start,
        max_iter: spec.max_iter,
        tol: spec.tol,
        engine: cfg.engine(),
    };
    let report = solve_compatibility(&spec.potential, &float_amplitudes(cfg)?, &settings)?;
    art.csv("trace.csv", &report.trace)?;
    let passed = report.converged;
    Ok(Outcome { result: serde_json::to_value(report)?, passed })
}

/// Monte-Carlo failure fractions over a sweep of `gamma`.
pub fn measure(cfg: &RunConfig, art: &Artifacts) -> Result<Outcome> {
    let spec = &cfg.measure;
    let mc = MeasureConfig {
        tau: spec.tau,
        depth: spec.depth,
        window: spec.window,
        alpha: spec.alpha,
        budget: SearchBudget::new(spec.radius, spec.max_nodes),
        samples: spec.samples,
        seed: cfg.seed,
    };
    let sweep = measure_sweep(&spec.gammas, &mc, cfg.exec())?;
    art.csv("measure.csv", &sweep.estimates)?;
    Ok(Outcome { result: serde_json::to_value(sweep)?, passed: true })
}

/// Randomized inequality and permutation suites.
pub fn oracle(cfg: &RunConfig, art: &Artifacts) -> Result<Outcome> {
    let reports = default_suite(cfg.oracle, cfg.seed, cfg.exec());
    let passed = reports.iter().all(|r| r.passed());
    art.csv("oracle.csv", &reports)?;
    Ok(Outcome { result: json!({ "suites": reports, "all_passed": passed }), passed })
}
