//! Pruned depth-first search over finite weighted integer lattices.

use serde::{Deserialize, Serialize};

use super::{DiophantineParams, FrequencyVector};
use crate::error::{Error, Result};
use crate::momentum::{bracket, SparseMomentum};
use crate::scalar::Real;

/// Lattice truncation and node cap for infimum searches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Radius `x` of the ball `|nu|_{alpha/2} <= x`.
    pub radius: f64,
    /// Maximal number of visited nodes.
    pub max_nodes: u64,
}

impl SearchBudget {
    pub fn new(radius: f64, max_nodes: u64) -> Self {
        Self { radius, max_nodes }
    }
}

/// Result of an infimum search; `certified` is false when the node cap stopped the search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeInfimum {
    pub value: f64,
    pub certified: bool,
    pub witness: Option<SparseMomentum>,
    pub nodes: u64,
}

/// Verdict of a Diophantine scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineVerdict {
    pub holds: bool,
    pub witness: Option<SparseMomentum>,
    /// False when the node cap stopped the scan before a violator was found.
    pub exhausted: bool,
    pub nodes: u64,
}

/// The truncated lattice with indices sorted by decreasing `|omega_i|`.
struct Lattice {
    index: Vec<i64>,
    weight: Vec<f64>,
    omega: Vec<f64>,
    cap: Vec<i64>,
    log_bracket_sq: Vec<f64>,
    /// `sum_{t >= k} cap_t |omega_t|`.
    tail_sum: Vec<f64>,
    /// `max_{t >= k} |omega_t| / w_t`.
    tail_ratio: Vec<f64>,
    /// `sum_{t >= k} cap_t`.
    tail_count: Vec<i64>,
    radius: f64,
}

impl Lattice {
    fn build(omega: &[f64], window: i64, radius: f64, alpha: f64) -> Lattice {
        let mu = alpha / 2.0;
        let mut items: Vec<(i64, f64, f64, i64)> = Vec::new();
        for j in -window..=window {
            let w = bracket(j).powf(mu);
            if w <= radius + 1e-12 {
                let cap = ((radius + 1e-12) / w).floor() as i64;
                if cap > 0 {
                    items.push((j, w, omega[(j + window) as usize], cap));
                }
            }
        }
        items.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then(a.0.cmp(&b.0)));
        let n = items.len();
        let mut tail_sum = vec![0.0; n + 1];
        let mut tail_ratio = vec![0.0f64; n + 1];
        let mut tail_count = vec![0; n + 1];
        for k in (0..n).rev() {
            let (_, w, om, cap) = items[k];
            tail_sum[k] = tail_sum[k + 1] + cap as f64 * om.abs();
            tail_ratio[k] = tail_ratio[k + 1].max(om.abs() / w);
            tail_count[k] = tail_count[k + 1] + cap;
        }
        Lattice {
            index: items.iter().map(|i| i.0).collect(),
            weight: items.iter().map(|i| i.1).collect(),
            omega: items.iter().map(|i| i.2).collect(),
            cap: items.iter().map(|i| i.3).collect(),
            log_bracket_sq: items.iter().map(|i| bracket(i.0).powi(2)).collect(),
            tail_sum,
            tail_ratio,
            tail_count,
            radius,
        }
    }

    fn momentum(&self, coeffs: &[i64]) -> SparseMomentum {
        SparseMomentum::from_pairs(self.index.iter().zip(coeffs).filter(|p| *p.1 != 0).map(|(i, c)| (*i, *c)))
    }
}

/// What the search is optimizing; all bounds are lower bounds over completions.
trait Objective {
    /// `lower` bounds `|omega . nu|` over completions; `log_weight` is the assigned part of
    /// `tau * sum log(1 + <i>^2 nu_i^2)`.
    fn prune(&self, lower: f64, log_weight: f64) -> bool;
    /// Returns true to stop the search.
    fn leaf(&mut self, value: f64, log_weight: f64, coeffs: &[i64]) -> bool;
}

struct Dfs<'a, O: Objective> {
    lat: &'a Lattice,
    obj: &'a mut O,
    zero_charge: bool,
    tau: f64,
    coeffs: Vec<i64>,
    nodes: u64,
    max_nodes: u64,
    aborted: bool,
    stopped: bool,
}

impl<O: Objective> Dfs<'_, O> {
    fn run(&mut self, k: usize, sum: f64, used: f64, charge: i64, log_weight: f64, nonzero: usize) {
        if self.aborted || self.stopped {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.aborted = true;
            return;
        }
        let lat = self.lat;
        let remaining = (lat.radius - used).max(0.0);
        let reach = lat.tail_sum[k].min(remaining * lat.tail_ratio[k]);
        if self.obj.prune(sum.abs() - reach, log_weight) {
            return;
        }
        if self.zero_charge && charge.abs() > lat.tail_count[k] {
            return;
        }
        if k == lat.index.len() {
            if nonzero > 0 && (!self.zero_charge || charge == 0) && self.obj.leaf(sum.abs(), log_weight, &self.coeffs) {
                self.stopped = true;
            }
            return;
        }
        let w = lat.weight[k];
        let cap = lat.cap[k].min(((remaining + 1e-12) / w).floor() as i64);
        let om = lat.omega[k];
        let centre = if om != 0.0 { (-sum / om).round() as i64 } else { 0 };
        let centre = centre.clamp(-cap, cap);
        // Visit coefficients in order of increasing |sum + v * omega|.
        let mut order = Vec::with_capacity((2 * cap + 1) as usize);
        order.push(centre);
        for d in 1..=(2 * cap) {
            for v in [centre + d, centre - d] {
                if v.abs() <= cap {
                    order.push(v);
                }
            }
        }
        for v in order {
            self.coeffs[k] = v;
            let lw = if v != 0 { self.tau * (1.0 + lat.log_bracket_sq[k] * (v * v) as f64).ln() } else { 0.0 };
            self.run(
                k + 1,
                sum + v as f64 * om,
                used + v.abs() as f64 * w,
                charge + v,
                log_weight + lw,
                nonzero + usize::from(v != 0),
            );
            if self.aborted || self.stopped {
                break;
            }
        }
        self.coeffs[k] = 0;
    }
}

fn search<O: Objective>(lat: &Lattice, obj: &mut O, zero_charge: bool, tau: f64, max_nodes: u64) -> (u64, bool) {
    let mut dfs = Dfs {
        lat,
        obj,
        zero_charge,
        tau,
        coeffs: vec![0; lat.index.len()],
        nodes: 0,
        max_nodes,
        aborted: false,
        stopped: false,
    };
    dfs.run(0, 0.0, 0.0, 0, 0.0, 0);
    (dfs.nodes, !dfs.aborted)
}

struct MinAbs {
    best: f64,
    witness: Option<Vec<i64>>,
}

impl Objective for MinAbs {
    fn prune(&self, lower: f64, _: f64) -> bool {
        lower >= self.best
    }
    fn leaf(&mut self, value: f64, _: f64, coeffs: &[i64]) -> bool {
        if value < self.best {
            self.best = value;
            self.witness = Some(coeffs.to_vec());
        }
        value == 0.0
    }
}

fn infimum<R: Real>(
    omega: &FrequencyVector<R>,
    x: f64,
    alpha: f64,
    budget: SearchBudget,
    zero_charge: bool,
) -> Result<LatticeInfimum> {
    if x < 1.0 {
        return Err(Error::Precondition(format!("lattice radius {x} < 1")));
    }
    let table = omega.to_f64_table()?;
    let lat = Lattice::build(&table, omega.window, x.min(budget.radius.max(x)), alpha);
    let mut obj = MinAbs { best: f64::INFINITY, witness: None };
    let (nodes, certified) = search(&lat, &mut obj, zero_charge, 0.0, budget.max_nodes);
    Ok(LatticeInfimum { value: obj.best, certified, witness: obj.witness.map(|c| lat.momentum(&c)), nodes })
}

/// `inf |omega . nu|` over `0 < |nu|_{alpha/2} <= x`; `+inf` when the lattice is empty.
pub fn beta<R: Real>(omega: &FrequencyVector<R>, x: f64, alpha: f64, budget: SearchBudget) -> Result<LatticeInfimum> {
    infimum(omega, x, alpha, budget, false)
}

/// As [`beta`] restricted to zero total charge.
pub fn beta0<R: Real>(omega: &FrequencyVector<R>, x: f64, alpha: f64, budget: SearchBudget) -> Result<LatticeInfimum> {
    infimum(omega, x, alpha, budget, true)
}

struct FirstViolator {
    log_gamma: f64,
    witness: Option<Vec<i64>>,
}

impl Objective for FirstViolator {
    fn prune(&self, lower: f64, log_weight: f64) -> bool {
        lower > 0.0 && lower.ln() > self.log_gamma - log_weight
    }
    fn leaf(&mut self, value: f64, log_weight: f64, coeffs: &[i64]) -> bool {
        if value == 0.0 || value.ln() <= self.log_gamma - log_weight {
            self.witness = Some(coeffs.to_vec());
            return true;
        }
        false
    }
}

/// Scans the budget lattice for `nu` with `|omega . nu| <= gamma prod_i (1 + <i>^2 nu_i^2)^{-tau}`.
pub fn diophantine_check<R: Real>(
    omega: &FrequencyVector<R>,
    params: DiophantineParams,
    alpha: f64,
    budget: SearchBudget,
    zero_charge: bool,
) -> Result<DiophantineVerdict> {
    let table = omega.to_f64_table()?;
    let lat = Lattice::build(&table, omega.window, budget.radius, alpha);
    if params.gamma == 0.0 {
        // Only exact resonances violate the vacuous bound.
        let mut obj = MinAbs { best: f64::INFINITY, witness: None };
        let (nodes, certified) = search(&lat, &mut obj, zero_charge, 0.0, budget.max_nodes);
        let violated = obj.best == 0.0;
        return Ok(DiophantineVerdict {
            holds: !violated,
            witness: if violated { obj.witness.map(|c| lat.momentum(&c)) } else { None },
            exhausted: certified,
            nodes,
        });
    }
    let mut obj = FirstViolator { log_gamma: params.gamma.ln(), witness: None };
    let (nodes, certified) = search(&lat, &mut obj, zero_charge, params.tau, budget.max_nodes);
    let found = obj.witness.is_some();
    Ok(DiophantineVerdict {
        holds: !found,
        witness: obj.witness.map(|c| lat.momentum(&c)),
        exhausted: certified || found,
        nodes,
    })
}

struct MinRatio {
    best: f64,
    witness: Option<Vec<i64>>,
}

impl Objective for MinRatio {
    fn prune(&self, lower: f64, log_weight: f64) -> bool {
        lower > 0.0 && lower.ln() + log_weight >= self.best.ln()
    }
    fn leaf(&mut self, value: f64, log_weight: f64, coeffs: &[i64]) -> bool {
        let r = if value == 0.0 { 0.0 } else { (value.ln() + log_weight).exp() };
        if r < self.best {
            self.best = r;
            self.witness = Some(coeffs.to_vec());
        }
        r == 0.0
    }
}

/// Smallest `|omega . nu| prod_i (1 + <i>^2 nu_i^2)^tau` on the lattice, searched only below `ceiling`.
///
/// `omega` fails the Diophantine bound with parameter `gamma` iff the returned value is `<= gamma`
/// (for `gamma <= ceiling`), so one scan serves a whole sweep of `gamma`.
pub fn diophantine_margin(
    omega_table: &[f64],
    window: i64,
    tau: f64,
    alpha: f64,
    budget: SearchBudget,
    ceiling: f64,
    zero_charge: bool,
) -> LatticeInfimum {
    let lat = Lattice::build(omega_table, window, budget.radius, alpha);
    let mut obj = MinRatio { best: ceiling * (1.0 + 1e-12), witness: None };
    let (nodes, certified) = search(&lat, &mut obj, zero_charge, tau, budget.max_nodes);
    LatticeInfimum { value: obj.best, certified, witness: obj.witness.map(|c| lat.momentum(&c)), nodes }
}

/// `beta^*(x) / gamma = (max prod_i (1 + <i>^2 nu_i^2))^{-tau}` over the zero-charge ball `|nu|_{alpha/2} <= x`.
pub fn beta_star(x: f64, tau: f64, alpha: f64, window: i64, max_nodes: u64) -> LatticeInfimum {
    // Maximize the log-product: reuse the search with a zero frequency and a custom objective.
    struct MaxWeight {
        best: f64,
        witness: Option<Vec<i64>>,
        slope: f64,
        radius: f64,
    }
    impl Objective for MaxWeight {
        fn prune(&self, _: f64, _: f64) -> bool {
            false
        }
        fn leaf(&mut self, _: f64, log_weight: f64, coeffs: &[i64]) -> bool {
            if log_weight > self.best {
                self.best = log_weight;
                self.witness = Some(coeffs.to_vec());
            }
            let _ = (self.slope, self.radius);
            false
        }
    }
    let zeros = vec![0.0; (2 * window + 1) as usize];
    let lat = Lattice::build(&zeros, window, x, alpha);
    let mut obj = MaxWeight { best: f64::NEG_INFINITY, witness: None, slope: 0.0, radius: x };
    let (nodes, certified) = search(&lat, &mut obj, true, tau, max_nodes);
    LatticeInfimum {
        value: if obj.best.is_finite() { (-obj.best).exp() } else { f64::INFINITY },
        certified,
        witness: obj.witness.map(|c| lat.momentum(&c)),
        nodes,
    }
}

/// Exponent `C` such that `beta^*(x)/gamma = (1 + x)^{-C x^{1/(1+alpha/2)}}`.
pub fn stimobeta_exponent(beta_star_over_gamma: f64, x: f64, alpha: f64) -> f64 {
    -beta_star_over_gamma.ln() / (x.powf(1.0 / (1.0 + alpha / 2.0)) * (1.0 + x).ln())
}
