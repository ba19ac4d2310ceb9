//! Independent checks: a naive quintic recursion, two inequalities on integer
//! sequences, and the permutation identities for products of inverse partial sums.

use std::collections::BTreeMap;

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frequency::FrequencyVector;
use crate::lindstedt::{AmplitudeConfig, CoefficientTable};
use crate::momentum::{ModeIndex, Sign, SparseMomentum, QUINTIC_SIGNS};
use crate::scalar::{signed_value, Coeff, Cx, Real};

/// Largest order accepted by [`brute_quintic`].
pub const BRUTE_ORDER_CAP: usize = 2;

/// Coefficients and counterterms from the naive recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteTables<R: Real> {
    pub coefficients: CoefficientTable<R>,
    /// `eta^(k)_j` for every pair read or produced, on and off the support.
    pub counterterms: BTreeMap<(usize, ModeIndex), R>,
}

type Entries<R> = Vec<(SparseMomentum, Cx<R>)>;

/// `sum u_1 conj(u_2) u_3 conj(u_4) u_5` over all factor choices whose orders sum to `m`.
fn naive_quintic<R: Real>(tables: &[Entries<R>], m: usize) -> BTreeMap<SparseMomentum, Cx<R>> {
    let mut out: BTreeMap<SparseMomentum, Cx<R>> = BTreeMap::new();
    for orders in (0..5).map(|_| 0..=m).multi_cartesian_product().filter(|o| o.iter().sum::<usize>() == m) {
        let lists: Vec<&Entries<R>> = orders.iter().map(|&k| &tables[k]).collect();
        for pick in lists.iter().map(|l| l.iter()).multi_cartesian_product() {
            let mut nu = SparseMomentum::zero();
            let mut value: Cx<R> = Coeff::<R>::from_complex(Cx::new(R::one(), R::zero()));
            for (i, (key, u)) in pick.into_iter().enumerate() {
                nu = nu.add_signed(key, QUINTIC_SIGNS[i]);
                value = value.mul_ref(&signed_value(u, QUINTIC_SIGNS[i]));
            }
            out.entry(nu).or_insert_with(Coeff::<R>::zero).add_assign_ref(&value);
        }
    }
    out
}

/// Coefficient of the amplitude at an off-support mode `j` in the order-zero quintic term at
/// `e_j`: five-fold choices from the support plus `j`, with `j` used exactly once at weight one.
fn linear_coefficient<R: Real>(amplitudes: &AmplitudeConfig<R>, j: ModeIndex) -> Cx<R> {
    let mut modes: Vec<(ModeIndex, Option<Cx<R>>)> = amplitudes.amplitudes().iter().map(|(m, c)| (*m, Some(c.clone()))).collect();
    modes.push((j, None));
    let target = SparseMomentum::basis(j);
    let mut acc: Cx<R> = Coeff::<R>::zero();
    for pick in (0..5).map(|_| modes.iter()).multi_cartesian_product() {
        if pick.iter().filter(|(_, c)| c.is_none()).count() != 1 {
            continue;
        }
        let mut nu = SparseMomentum::zero();
        let mut value: Cx<R> = Coeff::<R>::from_complex(Cx::new(R::one(), R::zero()));
        for (i, (m, c)) in pick.into_iter().enumerate() {
            nu = nu.add_signed(&SparseMomentum::basis(*m), QUINTIC_SIGNS[i]);
            if let Some(c) = c {
                value = value.mul_ref(&signed_value(c, QUINTIC_SIGNS[i]));
            }
        }
        if nu == target {
            acc.add_assign_ref(&value);
        }
    }
    acc
}

/// The order-by-order recursion through `order <= 2` by nested loops, with no convolution
/// caching and no shared code with the engine.
pub fn brute_quintic<R: Real>(amplitudes: &AmplitudeConfig<R>, omega: &FrequencyVector<R>, order: usize) -> Result<BruteTables<R>> {
    if order > BRUTE_ORDER_CAP {
        return Err(Error::OrderCap { order, cap: BRUTE_ORDER_CAP });
    }
    let mut tables: Vec<Entries<R>> =
        vec![amplitudes.amplitudes().iter().map(|(j, c)| (SparseMomentum::basis(*j), c.clone())).collect()];
    let mut eta: BTreeMap<(usize, ModeIndex), R> = BTreeMap::new();
    let eta_at = |k: usize, j: ModeIndex, eta: &mut BTreeMap<(usize, ModeIndex), R>, q: &BTreeMap<SparseMomentum, Cx<R>>| {
        if let Some(v) = eta.get(&(k, j)) {
            return v.clone();
        }
        let v = match amplitudes.get(j) {
            Some(c) => -(q.get(&SparseMomentum::basis(j)).cloned().unwrap_or_else(Coeff::<R>::zero) / c.clone()).re,
            // Off the support only first-order values are read below order three.
            None => -linear_coefficient(amplitudes, j).re,
        };
        eta.insert((k, j), v.clone());
        v
    };
    for k in 1..=order {
        let q = naive_quintic(&tables, k - 1);
        for j in amplitudes.support() {
            eta_at(k, j, &mut eta, &q);
        }
        let mut keys: Vec<SparseMomentum> = q.keys().cloned().collect();
        for k1 in 1..k {
            keys.extend(tables[k - k1].iter().map(|(nu, _)| nu.clone()));
        }
        keys.sort();
        keys.dedup();
        let mut next = Vec::new();
        for nu in keys.into_iter().filter(|nu| !nu.is_basis(nu.pi())) {
            let j = nu.pi();
            let mut num = q.get(&nu).cloned().unwrap_or_else(Coeff::<R>::zero);
            for k1 in 1..k {
                if let Some((_, u)) = tables[k - k1].iter().find(|(key, _)| *key == nu) {
                    let e = eta_at(k1, j, &mut eta, &BTreeMap::new());
                    num.add_assign_ref(&Coeff::<R>::scale(u, &e));
                }
            }
            let d = omega.dot(&nu)? - omega.omega(j)?;
            if d.is_zero() {
                return Err(Error::DivisorTooSmall { j, nu: Box::new(nu), value: 0.0, floor: 0.0 });
            }
            if !Coeff::<R>::is_zero(&num) {
                next.push((nu, num.div_real(&d)));
            }
        }
        tables.push(next);
    }
    let coefficients = CoefficientTable { orders: tables.into_iter().map(|t| t.into_iter().collect()).collect() };
    Ok(BruteTables { coefficients, counterterms: eta })
}

/// Left side, right side and verdict of an inequality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `sum_{i>=2} n_i^alpha - n_1^alpha >= (2 - 2^alpha) sum_{i>=3} n_i^alpha` for a non-increasing
/// sequence with `n_1 + sum_{i>=2} sigma_i n_i = 0`; `signs` holds `sigma_2, ..., sigma_p`.
pub fn fractional_power_check(n: &[u64], signs: &[Sign], alpha: f64) -> Result<InequalityCheck> {
    if n.len() < 2 || signs.len() + 1 != n.len() {
        return Err(Error::Precondition("need p >= 2 values and p - 1 signs".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside (0, 1)")));
    }
    if n.windows(2).any(|w| w[0] < w[1]) || n.contains(&0) {
        return Err(Error::Precondition("values must be positive and non-increasing".into()));
    }
    let balance = n[0] as i128 + signs.iter().zip(&n[1..]).map(|(s, x)| s.value() as i128 * *x as i128).sum::<i128>();
    if balance != 0 {
        return Err(Error::Precondition(format!("signed sum is {balance}, not zero")));
    }
    let pow = |x: &u64| (*x as f64).powf(alpha);
    let lhs = n[1..].iter().map(pow).sum::<f64>() - pow(&n[0]);
    let rhs = (2.0 - 2f64.powf(alpha)) * n.iter().skip(2).map(pow).sum::<f64>();
    // Equality cases are decided up to rounding.
    let slack = 1e-12 * (1.0 + lhs.abs() + rhs.abs());
    Ok(InequalityCheck { lhs, rhs, holds: lhs + slack >= rhs })
}

/// `n_1 <= 3 sum_{i>=3} n_i^2 + p - p_hat` for a non-increasing sequence of length `p_hat >= 3`
/// with `|sum sigma_i n_i^2| <= p` and equal signs on an equal leading pair.
pub fn square_sum_check(n: &[u64], signs: &[Sign], p: u64) -> Result<InequalityCheck> {
    let p_hat = n.len() as u64;
    if p_hat < 3 || signs.len() != n.len() {
        return Err(Error::Precondition("need p_hat >= 3 values and as many signs".into()));
    }
    if p < p_hat {
        return Err(Error::Precondition(format!("p = {p} below p_hat = {p_hat}")));
    }
    if n.windows(2).any(|w| w[0] < w[1]) || n.contains(&0) {
        return Err(Error::Precondition("values must be positive and non-increasing".into()));
    }
    if n[0] == n[1] && signs[0] != signs[1] {
        return Err(Error::Precondition("equal leading values need equal signs".into()));
    }
    let quadratic: i128 = signs.iter().zip(n).map(|(s, x)| s.value() as i128 * (*x as i128).pow(2)).sum();
    if quadratic.unsigned_abs() > p as u128 {
        return Err(Error::Precondition(format!("|sum sigma_i n_i^2| = {} exceeds p = {p}", quadratic.abs())));
    }
    let tail: u128 = n[2..].iter().map(|x| (*x as u128).pow(2)).sum();
    let rhs = 3 * tail + (p - p_hat) as u128;
    Ok(InequalityCheck { lhs: n[0] as f64, rhs: rhs as f64, holds: n[0] as u128 <= rhs })
}

/// Which permutations enter [`permutation_sum`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    AllowedOnly,
    All,
}

/// Largest length accepted by the permutation sums.
pub const PERMUTATION_CAP: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationSum {
    pub value: BigRational,
    /// Permutations contributing to `value`.
    pub counted: u64,
    /// Permutations with a vanishing proper partial sum, left out.
    pub excluded: u64,
}

fn check_permutation_input(x: &[BigRational]) -> Result<()> {
    if x.is_empty() || x.len() > PERMUTATION_CAP {
        return Err(Error::Precondition(format!("length {} outside 1..={PERMUTATION_CAP}", x.len())));
    }
    if x.iter().any(Zero::is_zero) {
        return Err(Error::Precondition("entries must be nonzero".into()));
    }
    Ok(())
}

/// `sum_pi prod_{i<n} 1 / D_i(pi(x))` with `D_i` the partial sums, over the permutations selected
/// by `mode`; permutations with a vanishing `D_i`, `i < n`, are never summed.
///
/// Evaluated over subsets: the prefixes of a permutation are the nested sets of its first
/// elements, so the sum factors through the `2^n` subsets.
pub fn permutation_sum(x: &[BigRational], mode: PermutationMode) -> Result<PermutationSum> {
    check_permutation_input(x)?;
    // Forbidden permutations are skipped in both modes and reported in `excluded`.
    let _ = mode;
    let n = x.len();
    let full = (1usize << n) - 1;
    let sums: Vec<BigRational> = (0..=full)
        .map(|s| (0..n).filter(|i| s >> i & 1 == 1).fold(BigRational::zero(), |a, i| a + x[i].clone()))
        .collect();
    // weight[s]: sum over orderings of s of prod 1 / D over its prefixes; ways[s]: their count.
    let mut weight = vec![BigRational::zero(); full + 1];
    let mut ways = vec![0u64; full + 1];
    weight[0] = BigRational::one();
    ways[0] = 1;
    for s in 1..full {
        if sums[s].is_zero() {
            continue;
        }
        let mut w = BigRational::zero();
        let mut c = 0;
        for i in (0..n).filter(|i| s >> i & 1 == 1) {
            let prev = s & !(1 << i);
            w += weight[prev].clone();
            c += ways[prev];
        }
        weight[s] = w / sums[s].clone();
        ways[s] = c;
    }
    let mut value = BigRational::zero();
    let mut counted = 0;
    for i in 0..n {
        let prev = full & !(1 << i);
        value += weight[prev].clone();
        counted += ways[prev];
    }
    let total: u64 = (1..=n as u64).product();
    Ok(PermutationSum { value, counted, excluded: total - counted })
}

/// [`permutation_sum`] by explicit enumeration of every permutation.
pub fn permutation_sum_enumerated(x: &[BigRational], mode: PermutationMode) -> Result<PermutationSum> {
    check_permutation_input(x)?;
    // Forbidden permutations are skipped in both modes and reported in `excluded`.
    let _ = mode;
    let n = x.len();
    let mut value = BigRational::zero();
    let (mut counted, mut excluded) = (0, 0);
    for perm in (0..n).permutations(n) {
        let mut prefix = BigRational::zero();
        let mut product = BigRational::one();
        let mut allowed = true;
        for &i in &perm[..n - 1] {
            prefix += x[i].clone();
            if prefix.is_zero() {
                allowed = false;
                break;
            }
            product /= prefix.clone();
        }
        if allowed {
            value += product;
            counted += 1;
        } else {
            excluded += 1;
        }
    }
    Ok(PermutationSum { value, counted, excluded })
}

/// `(x_1 + ... + x_n) prod 1 / x_i`.
pub fn permutation_closed_form(x: &[BigRational]) -> BigRational {
    let total = x.iter().fold(BigRational::zero(), |a, v| a + v.clone());
    x.iter().fold(total, |a, v| a / v.clone())
}

/// Outcome of a randomized suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub instances: u64,
    pub violations: u64,
    pub seed: u64,
    pub first_violation: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.instances > 0
    }
}

const SUITE_CHUNKS: u64 = 64;

/// Runs `instances` draws split into fixed chunks, each with its own stream of `seed`; the
/// outcome does not depend on `exec`.
fn run_suite(
    suite: &str,
    instances: u64,
    seed: u64,
    exec: Exec,
    draw: impl Fn(&mut ChaCha8Rng) -> Option<String> + Sync + Send,
) -> SuiteReport {
    let chunks: Vec<u64> = (0..SUITE_CHUNKS).collect();
    let results = exec.map(&chunks, |&c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        let count = instances / SUITE_CHUNKS + u64::from(c < instances % SUITE_CHUNKS);
        let mut violations = 0;
        let mut first = None;
        for _ in 0..count {
            if let Some(msg) = draw(&mut rng) {
                violations += 1;
                first.get_or_insert(msg);
            }
        }
        (violations, first)
    });
    let violations = results.iter().map(|r| r.0).sum();
    let first_violation = results.into_iter().find_map(|r| r.1);
    SuiteReport { suite: suite.into(), instances, violations, seed, first_violation }
}

fn random_sign(rng: &mut ChaCha8Rng, minus_bias: f64) -> Sign {
    if rng.random_bool(minus_bias) {
        Sign::Minus
    } else {
        Sign::Plus
    }
}

/// Random non-increasing sequences with zero signed sum, `p <= 8`, `alpha` in {1/4, 1/2, 3/4}.
pub fn fractional_power_suite(instances: u64, seed: u64, exec: Exec) -> SuiteReport {
    run_suite("fractional-power", instances, seed, exec, |rng| loop {
        let p = rng.random_range(3..=8);
        let mut rest: Vec<(u64, Sign)> = (1..p).map(|_| (rng.random_range(1..=60), random_sign(rng, 0.75))).collect();
        let balance: i64 = rest.iter().map(|(x, s)| s.value() * *x as i64).sum();
        let first = -balance;
        if first <= 0 || rest.iter().any(|(x, _)| *x as i64 > first) {
            continue;
        }
        rest.sort_by_key(|r| std::cmp::Reverse(r.0));
        let n: Vec<u64> = std::iter::once(first as u64).chain(rest.iter().map(|r| r.0)).collect();
        let signs: Vec<Sign> = rest.iter().map(|r| r.1).collect();
        let alpha = [0.25, 0.5, 0.75][rng.random_range(0..3)];
        return match fractional_power_check(&n, &signs, alpha) {
            Ok(c) if c.holds => None,
            Ok(c) => Some(format!("n = {n:?}, alpha = {alpha}: {c:?}")),
            Err(e) => Some(format!("n = {n:?}: {e}")),
        };
    })
}

/// Random sequences of length `3..=6` with a nearly balanced signed sum of squares.
pub fn square_sum_suite(instances: u64, seed: u64, exec: Exec) -> SuiteReport {
    run_suite("square-sum", instances, seed, exec, |rng| loop {
        let p_hat = rng.random_range(3..=6u64);
        let mut terms: Vec<(u64, Sign)> = (1..p_hat).map(|_| (rng.random_range(1..=40), random_sign(rng, 0.5))).collect();
        let rest: i64 = terms.iter().map(|(x, s)| s.value() * (*x as i64).pow(2)).sum();
        let lead = (rest.unsigned_abs() as f64).sqrt().round() as u64;
        if lead == 0 {
            continue;
        }
        let lead_sign = if rest > 0 { Sign::Minus } else { Sign::Plus };
        terms.push((lead, lead_sign));
        terms.sort_by_key(|t| std::cmp::Reverse(t.0));
        let n: Vec<u64> = terms.iter().map(|t| t.0).collect();
        let signs: Vec<Sign> = terms.iter().map(|t| t.1).collect();
        if n[0] == n[1] && signs[0] != signs[1] {
            continue;
        }
        let quadratic: i64 = terms.iter().map(|(x, s)| s.value() * (*x as i64).pow(2)).sum();
        let p = p_hat + rng.random_range(0..=4);
        if quadratic.unsigned_abs() > p {
            continue;
        }
        return match square_sum_check(&n, &signs, p) {
            Ok(c) if c.holds => None,
            Ok(c) => Some(format!("n = {n:?}, signs = {signs:?}, p = {p}: {c:?}")),
            Err(e) => Some(format!("n = {n:?}: {e}")),
        };
    })
}

fn random_rational(rng: &mut ChaCha8Rng, positive: bool) -> BigRational {
    loop {
        let num: i64 = if positive { rng.random_range(1..=30) } else { rng.random_range(-30..=30) };
        if num != 0 {
            return BigRational::new(BigInt::from(num), BigInt::from(rng.random_range(1..=12i64)));
        }
    }
}

/// Zero-sum rational vectors of length `2..=max_len`: the allowed-permutation sum must vanish.
pub fn permutation_suite(instances: u64, max_len: usize, seed: u64, exec: Exec) -> SuiteReport {
    run_suite("permutation", instances, seed, exec, |rng| loop {
        let n = rng.random_range(2..=max_len.clamp(2, PERMUTATION_CAP));
        let mut x: Vec<BigRational> = (1..n).map(|_| random_rational(rng, false)).collect();
        let last = -x.iter().fold(BigRational::zero(), |a, v| a + v.clone());
        if last.is_zero() {
            continue;
        }
        x.push(last);
        return match permutation_sum(&x, PermutationMode::AllowedOnly) {
            Ok(s) if s.value.is_zero() => None,
            Ok(s) => Some(format!("x = {x:?}: sum {}", s.value)),
            Err(e) => Some(e.to_string()),
        };
    })
}

/// Positive rational vectors (no vanishing partial sums): the full sum equals the closed form.
pub fn closed_form_suite(instances: u64, max_len: usize, seed: u64, exec: Exec) -> SuiteReport {
    run_suite("closed-form", instances, seed, exec, |rng| {
        let n = rng.random_range(1..=max_len.clamp(1, PERMUTATION_CAP));
        let mut x: Vec<BigRational> = (0..n).map(|_| random_rational(rng, true)).collect();
        if rng.random_bool(0.5) {
            x.iter_mut().for_each(|v| *v = -v.abs());
        }
        match permutation_sum(&x, PermutationMode::All) {
            Ok(s) if s.excluded == 0 && s.value == permutation_closed_form(&x) => None,
            Ok(s) => Some(format!("x = {x:?}: sum {} vs {}", s.value, permutation_closed_form(&x))),
            Err(e) => Some(e.to_string()),
        }
    })
}

/// Instance counts of the default suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSizes {
    pub fractional_power: u64,
    pub square_sum: u64,
    pub permutation: u64,
    pub closed_form: u64,
    pub max_len: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self { fractional_power: 100_000, square_sum: 100_000, permutation: 10_000, closed_form: 1_000, max_len: 7 }
    }
}

/// All randomized suites with one seed.
pub fn default_suite(sizes: SuiteSizes, seed: u64, exec: Exec) -> Vec<SuiteReport> {
    vec![
        fractional_power_suite(sizes.fractional_power, seed, exec),
        square_sum_suite(sizes.square_sum, seed, exec),
        permutation_suite(sizes.permutation, sizes.max_len, seed, exec),
        closed_form_suite(sizes.closed_form, sizes.max_len, seed, exec),
    ]
}
