//! Run configuration: JSON file plus command-line overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_rational::BigRational;
use qnls_core::asymptotics::reach_window;
use qnls_core::exec::Exec;
use qnls_core::frequency::{FrequencyVector, ParametricFrequency};
use qnls_core::lindstedt::{AmplitudeConfig, DecayParams, EngineSettings};
use qnls_core::momentum::ModeIndex;
use qnls_core::oracles::SuiteSizes;
use qnls_core::scalar::{cx, parse_rational, Rational};
use qnls_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Arithmetic used by the engine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Rational,
    Float,
}

/// A number given as JSON number or as text (`p/q`, integer or decimal).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Default for Number {
    fn default() -> Self {
        Number::Int(0)
    }
}

impl Number {
    /// Exact value; JSON floats keep their binary value.
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            Number::Int(n) => Ok(Rational::from_integer((*n).into())),
            Number::Float(x) => BigRational::from_float(*x).ok_or_else(|| Error::Parse(format!("non-finite number {x}"))),
            Number::Text(s) => parse_rational(s).ok_or_else(|| Error::Parse(format!("cannot read `{s}` as a number"))),
        }
    }
}

/// One amplitude `c_j = re + i im`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSpec {
    pub j: ModeIndex,
    pub re: Number,
    #[serde(default)]
    pub im: Number,
}

/// Frequency rule.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FrequencySpec {
    /// `omega_j = j^2`.
    #[default]
    Free,
    /// `omega_j = j^2 + V_j`.
    Potential { values: BTreeMap<String, Number> },
    /// Every `omega_j` on the window listed.
    Explicit { values: BTreeMap<String, Number> },
    Parametric {
        depth: usize,
        kappa0: Number,
        #[serde(default)]
        kappa: Vec<Number>,
        #[serde(default)]
        xi: BTreeMap<String, Number>,
    },
}

/// Mode-keyed table; keys are JSON strings since the enclosing rule is tagged.
fn rational_map(values: &BTreeMap<String, Number>) -> Result<BTreeMap<ModeIndex, Rational>> {
    values
        .iter()
        .map(|(j, v)| {
            let j = j.trim().parse().map_err(|_| Error::Parse(format!("mode index `{j}`")))?;
            Ok((j, v.to_rational()?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GevreySpec {
    pub s1: f64,
    pub s2: f64,
    pub alpha: f64,
}

impl Default for GevreySpec {
    fn default() -> Self {
        Self { s1: 0.1, s2: 0.1, alpha: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BryunoSpec {
    /// Explicit radii; when empty the dyadic schedule with `terms` steps is used.
    pub radii: Vec<f64>,
    pub terms: usize,
    pub alpha: f64,
    pub max_nodes: u64,
    /// Largest integer radius of the scale table.
    pub scale_radius: usize,
    pub gamma: f64,
    pub tau: f64,
    pub zero_charge: bool,
}

impl Default for BryunoSpec {
    fn default() -> Self {
        Self {
            radii: vec![],
            terms: 3,
            alpha: 0.5,
            max_nodes: 2_000_000,
            scale_radius: 4,
            gamma: 0.01,
            tau: 2.0,
            zero_charge: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptSpec {
    pub probe_start: ModeIndex,
    pub probe_end: ModeIndex,
    /// Number of inverse powers in the tail fit.
    pub depth: usize,
}

impl Default for AsymptSpec {
    fn default() -> Self {
        Self { probe_start: 6, probe_end: 30, depth: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompatSpec {
    pub depth: usize,
    pub window: i64,
    pub fit_start: i64,
    pub max_iter: usize,
    pub tol: f64,
    pub potential: BTreeMap<ModeIndex, f64>,
}

impl Default for CompatSpec {
    fn default() -> Self {
        Self { depth: 2, window: 12, fit_start: 5, max_iter: 30, tol: 1e-10, potential: BTreeMap::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSpec {
    pub gammas: Vec<f64>,
    pub tau: f64,
    pub depth: u32,
    pub window: i64,
    pub alpha: f64,
    pub radius: f64,
    pub max_nodes: u64,
    pub samples: u64,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        Self {
            gammas: vec![0.01, 0.02, 0.04, 0.08],
            tau: 2.0,
            depth: 2,
            window: 4,
            alpha: 0.5,
            radius: 2.5,
            max_nodes: 200_000,
            samples: 400,
        }
    }
}

/// Everything a run reads; echoed verbatim into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Truncation order `K`.
    pub order: usize,
    /// Frequency window; derived from the amplitudes when absent.
    pub window: Option<i64>,
    pub amplitudes: Vec<AmplitudeSpec>,
    pub decay: Option<DecayParams>,
    pub frequency: FrequencySpec,
    pub eps: f64,
    pub divisor_floor: f64,
    pub conditioning_floor: f64,
    pub order_cap: usize,
    /// Float-mode bound on the relative residual.
    pub residual_tol: f64,
    pub gevrey: GevreySpec,
    pub seed: u64,
    pub sequential: bool,
    pub out: Option<PathBuf>,
    pub bryuno: BryunoSpec,
    pub asympt: AsymptSpec,
    pub compat: CompatSpec,
    pub measure: MeasureSpec,
    pub oracle: SuiteSizes,
}

impl Default for RunConfig {
    fn default() -> Self {
        let engine = EngineSettings::default();
        Self {
            mode: Mode::Rational,
            order: 2,
            window: None,
            amplitudes: vec![],
            decay: None,
            frequency: FrequencySpec::Free,
            eps: 0.01,
            divisor_floor: engine.divisor_floor,
            conditioning_floor: engine.conditioning_floor,
            order_cap: engine.order_cap,
            residual_tol: 1e-9,
            gevrey: GevreySpec::default(),
            seed: 0,
            sequential: false,
            out: None,
            bryuno: BryunoSpec::default(),
            asympt: AsymptSpec::default(),
            compat: CompatSpec::default(),
            measure: MeasureSpec::default(),
            oracle: SuiteSizes::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    pub fn engine(&self) -> EngineSettings {
        EngineSettings {
            order: self.order,
            divisor_floor: self.divisor_floor,
            conditioning_floor: self.conditioning_floor,
            order_cap: self.order_cap,
            exec: self.exec(),
        }
    }

    /// Checks ranges that no later stage would report clearly.
    pub fn validate(&self) -> Result<()> {
        if self.order > self.order_cap {
            return Err(Error::OrderCap { order: self.order, cap: self.order_cap });
        }
        if !(self.divisor_floor >= 0.0 && self.conditioning_floor >= 0.0 && self.residual_tol >= 0.0) {
            return Err(Error::Config("floors and tolerances must be non-negative".into()));
        }
        if !self.eps.is_finite() || self.eps < 0.0 {
            return Err(Error::Config(format!("eps = {} must be finite and non-negative", self.eps)));
        }
        if matches!(self.window, Some(w) if w < 0) {
            return Err(Error::Config("negative window".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(a) = self.amplitudes.iter().find(|a| !seen.insert(a.j)) {
            return Err(Error::Config(format!("amplitude for mode {} given twice", a.j)));
        }
        Ok(())
    }

    /// Exact amplitudes on the smallest window holding the support.
    pub fn amplitudes(&self) -> Result<AmplitudeConfig<Rational>> {
        let table = self
            .amplitudes
            .iter()
            .map(|a| Ok((a.j, cx(a.re.to_rational()?, a.im.to_rational()?))))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let reach = table.keys().map(|j: &ModeIndex| j.abs()).max().unwrap_or(0);
        AmplitudeConfig::new(reach, table, self.decay)
    }

    /// The configured window, or every mode a tree of order `K` can reach.
    pub fn window_for(&self, amplitudes: &AmplitudeConfig<Rational>) -> i64 {
        self.window.unwrap_or_else(|| reach_window(amplitudes, 0, self.order).max(1))
    }

    pub fn frequencies(&self, window: i64) -> Result<FrequencyVector<Rational>> {
        Ok(match &self.frequency {
            FrequencySpec::Free => FrequencyVector::free(window),
            FrequencySpec::Potential { values } => FrequencyVector::with_potential(rational_map(values)?, window),
            FrequencySpec::Explicit { values } => FrequencyVector::explicit(rational_map(values)?, window),
            FrequencySpec::Parametric { .. } => FrequencyVector::parametric(self.parametric()?, window),
        })
    }

    /// Parametric frequencies; the free rule counts as depth one with zero shift.
    pub fn parametric(&self) -> Result<ParametricFrequency<Rational>> {
        match &self.frequency {
            FrequencySpec::Parametric { depth, kappa0, kappa, xi } => ParametricFrequency::new(
                *depth,
                kappa0.to_rational()?,
                kappa.iter().map(Number::to_rational).collect::<Result<_>>()?,
                rational_map(xi)?,
            ),
            FrequencySpec::Free => ParametricFrequency::new(1, Rational::from_integer(0.into()), vec![], BTreeMap::new()),
            _ => Err(Error::Config("this command needs a parametric or free frequency rule".into())),
        }
    }
}
