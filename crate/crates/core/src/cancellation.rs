//! Resonant-tree matrices, their sign structure, the derivative identity with the kernel
//! function, the chain cancellation and the localization split.
//!
//! A resonant tree is an unexpanded tree rooted on the kernel line `(j, e_j, sigma)` with one
//! fallen leaf `(j', sigma')`; the lines between that leaf and the root carry the shifted
//! divisor `x_l + sigma_l sigma' x`. Counterterm nodes read a supplied table, free or solved.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::FrequencyVector;
use crate::lindstedt::{AmplitudeConfig, CountertermTable, Engine, EngineSettings, EtaSource};
use crate::momentum::{ModeIndex, Sign};
use crate::scalar::{cx, modulus_f64, norm_sqr, signed_value, to_c64, Coeff, Cx, Real};
use crate::trees::{Family, LabelledTree, TreeContext, TreeEnumerator};
use crate::treesupport::mark_fallen_leaf;

/// Highest order handled by the resonant-tree sums.
pub const RESONANT_TREE_CAP: usize = 2;

const SIGNS: [Sign; 2] = [Sign::Plus, Sign::Minus];

/// 2x2 matrix indexed by `(sigma, sigma')`, row and column 0 for `+`.
pub type SignMatrix<R> = [[Cx<R>; 2]; 2];

/// `[[M_{++}(x), M_{+-}(-x)], [M_{-+}(x), M_{--}(-x)]]` and its derivative in `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonantMatrix<R: Real> {
    pub order: usize,
    pub mode: ModeIndex,
    pub partner: ModeIndex,
    pub x: R,
    pub entries: SignMatrix<R>,
    pub x_derivative: SignMatrix<R>,
}

/// Sums over resonant trees of one sign pair at one argument.
#[derive(Clone, Debug)]
struct EntrySums<R: Real> {
    total: Cx<R>,
    derivative: Cx<R>,
    /// Trees keeping a `(j', -sigma')` leaf.
    a_part: Cx<R>,
    /// Trees with no `(j', -sigma')` leaf left.
    b_part: Cx<R>,
}

/// Resonant-tree sums at fixed amplitudes, frequencies and counterterms.
pub struct ResonantTrees<'a, R: Real> {
    ctx: TreeContext<'a, R>,
    enumerators: HashMap<ModeIndex, TreeEnumerator>,
}

impl<'a, R: Real> ResonantTrees<'a, R> {
    pub fn new(amplitudes: &'a AmplitudeConfig<R>, omega: &'a FrequencyVector<R>, counterterms: &'a CountertermTable<R>) -> Self {
        Self { ctx: TreeContext { amplitudes, omega, counterterms: Some(counterterms) }, enumerators: HashMap::new() }
    }

    /// Trees rooted on `(j, e_j, sigma)` with leaves on the support and `partner`, including
    /// the counterterm node directly above a leaf.
    fn roots(&mut self, k: usize, j: ModeIndex, sign: Sign, partner: ModeIndex) -> Result<Vec<Arc<LabelledTree>>> {
        if k == 0 || k > RESONANT_TREE_CAP {
            return Err(Error::OrderCap { order: k, cap: RESONANT_TREE_CAP });
        }
        let support = self.ctx.amplitudes.support();
        let trees = self.enumerators.entry(partner).or_insert_with(|| {
            let mut modes = support;
            modes.push(partner);
            TreeEnumerator::with_cap(&modes, Family::Unexpanded, RESONANT_TREE_CAP)
        });
        let mut roots = trees.kernel(k, j, sign)?;
        roots.push(LabelledTree::counter(k, LabelledTree::leaf(j, sign))?);
        Ok(roots)
    }

    fn entry(&mut self, k: usize, j: ModeIndex, sign: Sign, partner: ModeIndex, fallen: Sign, y: &R) -> Result<EntrySums<R>> {
        let roots = self.roots(k, j, sign, partner)?;
        let mut sums = EntrySums { total: Coeff::<R>::zero(), derivative: Coeff::<R>::zero(), a_part: Coeff::<R>::zero(), b_part: Coeff::<R>::zero() };
        for root in &roots {
            for mark in mark_fallen_leaf(root, partner, fallen) {
                let v = mark.value(&self.ctx, y)?;
                if Coeff::<R>::is_zero(&v) {
                    continue;
                }
                let kept = root
                    .leaves()
                    .iter()
                    .any(|(p, l)| *p != mark.leaf && l.mode == partner && l.sign == fallen.flip());
                sums.total.add_assign_ref(&v);
                sums.derivative.add_assign_ref(&mark.shift_derivative(&self.ctx, y)?);
                if kept {
                    sums.a_part.add_assign_ref(&v);
                } else {
                    sums.b_part.add_assign_ref(&v);
                }
            }
        }
        Ok(sums)
    }

    /// The matrix in sign layout at argument `x`.
    pub fn matrix(&mut self, k: usize, j: ModeIndex, partner: ModeIndex, x: &R) -> Result<ResonantMatrix<R>> {
        let zero = || -> SignMatrix<R> { std::array::from_fn(|_| std::array::from_fn(|_| Coeff::<R>::zero())) };
        let (mut entries, mut x_derivative) = (zero(), zero());
        for (a, s) in SIGNS.into_iter().enumerate() {
            for (b, t) in SIGNS.into_iter().enumerate() {
                let y = if t == Sign::Plus { x.clone() } else { -x.clone() };
                let sums = self.entry(k, j, s, partner, t, &y)?;
                entries[a][b] = sums.total;
                x_derivative[a][b] = if t == Sign::Plus { sums.derivative } else { -sums.derivative };
            }
        }
        Ok(ResonantMatrix { order: k, mode: j, partner, x: x.clone(), entries, x_derivative })
    }
}

/// [`ResonantTrees::matrix`] for a single call.
pub fn resonant_matrix<R: Real>(
    k: usize,
    j: ModeIndex,
    partner: ModeIndex,
    x: &R,
    amplitudes: &AmplitudeConfig<R>,
    omega: &FrequencyVector<R>,
    counterterms: &CountertermTable<R>,
) -> Result<ResonantMatrix<R>> {
    ResonantTrees::new(amplitudes, omega, counterterms).matrix(k, j, partner, x)
}

/// `G^(k)_{j,sigma} = (eta^(k)_j c_j + Q_{k-1}(e_j))^sigma` with counterterms held fixed.
pub fn kernel_function<R: Real>(
    k: usize,
    j: ModeIndex,
    sign: Sign,
    amplitudes: &AmplitudeConfig<R>,
    omega: &FrequencyVector<R>,
    counterterms: &CountertermTable<R>,
    settings: EngineSettings,
) -> Result<Cx<R>> {
    if k == 0 {
        return Err(Error::Precondition("kernel function starts at order one".into()));
    }
    let settings = EngineSettings { order: k - 1, ..settings };
    let mut engine = Engine::run_with(amplitudes, omega, settings, EtaSource::Fixed(counterterms.clone()))?;
    let q = engine.kernel_projection(k - 1, j)?;
    let eta = counterterms
        .get(k, j)
        .ok_or_else(|| Error::Precondition(format!("missing counterterm at order {k}, mode {j}")))?;
    let c = amplitudes.get(j).cloned().unwrap_or_else(Coeff::<R>::zero);
    let g = Coeff::<R>::scale(&c, eta) + q;
    Ok(signed_value(&g, sign))
}

/// Outcome of comparing a resonant matrix entry at `x = 0` with a derivative of `G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub matrix_entry: Complex64,
    pub derivative: Complex64,
    pub deviation: f64,
    /// True when the two sides agree exactly.
    pub exact: bool,
}

/// `M^(k)_{j sigma j' sigma'}(0)` against `d G^(k)_{j,sigma} / d c_{j'}^{sigma'}`.
///
/// Rational mode differentiates exactly by interpolating `G` along the real and imaginary
/// directions on `4k + 3` points; float mode uses central differences with one Richardson step.
#[allow(clippy::too_many_arguments)]
pub fn derivative_identity_check<R: Real>(
    k: usize,
    j: ModeIndex,
    sign: Sign,
    partner: ModeIndex,
    fallen: Sign,
    amplitudes: &AmplitudeConfig<R>,
    omega: &FrequencyVector<R>,
    counterterms: &CountertermTable<R>,
    settings: EngineSettings,
) -> Result<DerivativeReport> {
    let entry = ResonantTrees::new(amplitudes, omega, counterterms).entry(k, j, sign, partner, fallen, &R::zero())?.total;
    let base = amplitudes.get(partner).cloned().unwrap_or_else(Coeff::<R>::zero);
    let g_at = |dir: &Cx<R>, t: &R| -> Result<Cx<R>> {
        let moved = base.clone() + Coeff::<R>::scale(dir, t);
        kernel_function(k, j, sign, &amplitudes.with_amplitude(partner, moved), omega, counterterms, settings)
    };
    let directional = |dir: Cx<R>| -> Result<Cx<R>> {
        if R::EXACT {
            let half = 2 * k as i64 + 1;
            let h = R::from_ratio(1, 64);
            let nodes: Vec<R> = (-half..=half).map(|i| R::from_int(i) * h.clone()).collect();
            let weights = lagrange_derivative_weights(&nodes);
            let mut acc: Cx<R> = Coeff::<R>::zero();
            for (t, w) in nodes.iter().zip(&weights) {
                acc.add_assign_ref(&Coeff::<R>::scale(&g_at(&dir, t)?, w));
            }
            Ok(acc)
        } else {
            let h = R::from_f64(1e-3);
            let central = |h: &R| -> Result<Cx<R>> {
                let d = g_at(&dir, h)?.sub_ref(&g_at(&dir, &-h.clone())?);
                Ok(d.div_real(&(R::from_int(2) * h.clone())))
            };
            let coarse = central(&h)?;
            let fine = central(&(h / R::from_int(2)))?;
            Ok(Coeff::<R>::scale(&fine, &R::from_int(4)).sub_ref(&coarse).div_real(&R::from_int(3)))
        }
    };
    let along_re = directional(cx(R::one(), R::zero()))?;
    let along_im = directional(cx(R::zero(), R::one()))?;
    let i_im = cx(-along_im.im.clone(), along_im.re.clone());
    let two = R::from_int(2);
    let derivative = match fallen {
        Sign::Plus => (along_re.clone() - i_im.clone()).div_real(&two),
        Sign::Minus => (along_re.clone() + i_im.clone()).div_real(&two),
    };
    let diff = entry.sub_ref(&derivative);
    Ok(DerivativeReport {
        matrix_entry: to_c64(&entry),
        derivative: to_c64(&derivative),
        deviation: modulus_f64(&diff),
        exact: Coeff::<R>::is_zero(&diff),
    })
}

/// Weights `w_i` with `p'(0) = sum w_i p(t_i)` for every polynomial of degree `< nodes.len()`.
fn lagrange_derivative_weights<R: Real>(nodes: &[R]) -> Vec<R> {
    (0..nodes.len())
        .map(|i| {
            let denom = nodes.iter().enumerate().filter(|(m, _)| *m != i).fold(R::one(), |acc, (_, t)| acc * (nodes[i].clone() - t.clone()));
            let mut numer = R::zero();
            for p in (0..nodes.len()).filter(|&p| p != i) {
                numer = numer
                    + nodes
                        .iter()
                        .enumerate()
                        .filter(|(m, _)| *m != i && *m != p)
                        .fold(R::one(), |acc, (_, t)| acc * -t.clone());
            }
            numer / denom
        })
        .collect()
}

/// Sign-structure diagnostics of the resonant matrix over a grid of arguments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// Largest imaginary part of the extracted real functions.
    pub max_imag: f64,
    /// Largest entrywise gap between the matrix and its reconstruction from the real functions.
    pub reconstruction_deviation: f64,
    /// `|det M(0)|`.
    pub det_at_zero: f64,
    /// `|A_+(0) + [j = j'] B(0) / |c_j|^2 - A_-(0)|`.
    pub split_at_zero: f64,
    /// Largest `|B|` seen; zero when `j != j'`.
    pub diagonal_block: f64,
    pub exact: bool,
    pub points: usize,
}

/// Extracts `A_{+}, A_{-}, B` from the tree classes and checks the decomposition on `grid`,
/// plus the rank-one structure at `x = 0`.
pub fn structure_at_zero_check<R: Real>(
    k: usize,
    j: ModeIndex,
    partner: ModeIndex,
    grid: &[R],
    amplitudes: &AmplitudeConfig<R>,
    omega: &FrequencyVector<R>,
    counterterms: &CountertermTable<R>,
) -> Result<StructureReport> {
    let (cj, cp) = match (amplitudes.get(j), amplitudes.get(partner)) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        _ => return Err(Error::Precondition("both modes must carry nonzero amplitudes".into())),
    };
    let mut trees = ResonantTrees::new(amplitudes, omega, counterterms);
    let mut report =
        StructureReport { max_imag: 0.0, reconstruction_deviation: 0.0, det_at_zero: 0.0, split_at_zero: 0.0, diagonal_block: 0.0, exact: true, points: 0 };
    let weight = |s: Sign, t: Sign| signed_value(&cj, s).mul_ref(&signed_value(&cp, t.flip()));
    let real_part = |z: &Cx<R>, report: &mut StructureReport| {
        report.max_imag = report.max_imag.max(z.im.to_f64().abs());
        report.exact &= z.im.is_zero();
        z.re.clone()
    };

    let mut points: Vec<R> = grid.to_vec();
    if !points.iter().any(|x| x.is_zero()) {
        points.push(R::zero());
    }
    for x in &points {
        // Real functions at +x and -x: a[y][sigma][sigma'] and b[y][sigma].
        let mut a = vec![vec![vec![R::zero(); 2]; 2]; 2];
        let mut b = vec![vec![R::zero(); 2]; 2];
        for (yi, y) in [x.clone(), -x.clone()].iter().enumerate() {
            for (si, s) in SIGNS.into_iter().enumerate() {
                for (ti, t) in SIGNS.into_iter().enumerate() {
                    let sums = trees.entry(k, j, s, partner, t, y)?;
                    let w = weight(s, t);
                    a[yi][si][ti] = real_part(&(sums.a_part / w), &mut report);
                    if s == t {
                        b[yi][si] = real_part(&sums.b_part, &mut report);
                        report.diagonal_block = report.diagonal_block.max(b[yi][si].to_f64().abs());
                    } else if !Coeff::<R>::is_zero(&sums.b_part) {
                        report.exact = false;
                        report.reconstruction_deviation = report.reconstruction_deviation.max(modulus_f64(&sums.b_part));
                    }
                }
            }
        }
        // A_+ = A_{++}, A_- = A_{-+}, B = B_+, all at +x (index 0) or -x (index 1).
        let a_plus = |yi: usize| a[yi][0][0].clone();
        let a_minus = |yi: usize| a[yi][1][0].clone();
        let b_fn = |yi: usize| if j == partner { b[yi][0].clone() } else { R::zero() };
        let m = trees.matrix(k, j, partner, x)?;
        let model: [[R; 2]; 2] = [[a_plus(0), a_minus(1)], [a_minus(0), a_plus(1)]];
        for (si, s) in SIGNS.into_iter().enumerate() {
            for (ti, t) in SIGNS.into_iter().enumerate() {
                let mut rebuilt = Coeff::<R>::scale(&weight(s, t), &model[si][ti]);
                if si == ti {
                    rebuilt = rebuilt + cx(b_fn(si), R::zero());
                }
                let gap = m.entries[si][ti].sub_ref(&rebuilt);
                report.exact &= Coeff::<R>::is_zero(&gap);
                report.reconstruction_deviation = report.reconstruction_deviation.max(modulus_f64(&gap));
            }
        }
        if x.is_zero() {
            let e = &m.entries;
            let det = e[0][0].mul_ref(&e[1][1]).sub_ref(&e[0][1].mul_ref(&e[1][0]));
            report.det_at_zero = modulus_f64(&det);
            report.exact &= Coeff::<R>::is_zero(&det);
            let mut split = a_plus(0) - a_minus(0);
            if j == partner {
                split = split + b_fn(0) / norm_sqr(&cj);
            }
            report.split_at_zero = split.to_f64().abs();
            report.exact &= split.is_zero();
        }
        report.points += 1;
    }
    Ok(report)
}

/// Magnitude of the chain product of resonant matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub max_entry: f64,
    /// Product of the largest entries of the factors, for relative comparison.
    pub factor_scale: f64,
    pub exact_zero: bool,
}

fn mat_mul<R: Real>(a: &SignMatrix<R>, b: &SignMatrix<R>) -> SignMatrix<R> {
    std::array::from_fn(|r| {
        std::array::from_fn(|c| {
            let mut acc = a[r][0].mul_ref(&b[0][c]);
            acc.add_assign_ref(&a[r][1].mul_ref(&b[1][c]));
            acc
        })
    })
}

/// `P_3 A` with `P_3 = diag(1, -1)`.
fn p3_times<R: Real>(a: &SignMatrix<R>) -> SignMatrix<R> {
    [a[0].clone(), [-a[1][0].clone(), -a[1][1].clone()]]
}

fn max_entry<R: Real>(a: &SignMatrix<R>) -> f64 {
    a.iter().flatten().map(modulus_f64).fold(0.0, f64::max)
}

/// `M^(k_1)_{j_1 j_2}(0) (prod P_3 dM^(k_i)_{j_i j_(i+1)}(0)) P_3 M^(k_p)_{j_p j_(p+1)}(0)` with
/// analytic `x` derivatives.
pub fn chain_cancellation_check<R: Real>(
    orders: &[usize],
    modes: &[ModeIndex],
    amplitudes: &AmplitudeConfig<R>,
    omega: &FrequencyVector<R>,
    counterterms: &CountertermTable<R>,
) -> Result<ChainReport> {
    let p = orders.len();
    if p < 2 || modes.len() != p + 1 {
        return Err(Error::Precondition("a chain needs p >= 2 orders and p + 1 modes".into()));
    }
    let mut trees = ResonantTrees::new(amplitudes, omega, counterterms);
    let zero = R::zero();
    let first = trees.matrix(orders[0], modes[0], modes[1], &zero)?;
    let mut scale = max_entry(&first.entries);
    let mut product = first.entries;
    for i in 1..p - 1 {
        let m = trees.matrix(orders[i], modes[i], modes[i + 1], &zero)?;
        scale *= max_entry(&m.x_derivative);
        product = mat_mul(&product, &p3_times(&m.x_derivative));
    }
    let last = trees.matrix(orders[p - 1], modes[p - 1], modes[p], &zero)?;
    scale *= max_entry(&last.entries);
    product = mat_mul(&product, &p3_times(&last.entries));
    Ok(ChainReport {
        max_entry: max_entry(&product),
        factor_scale: scale,
        exact_zero: product.iter().flatten().all(Coeff::<R>::is_zero),
    })
}

/// Localization operators on functions of `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalizationOp {
    Identity,
    /// `f(0)`.
    Local,
    /// `x f'(0)`.
    Derivative,
    /// `f - f(0) - x f'(0)`.
    Remainder,
}

/// Applies `op` to samples `values` of `f` on a uniform grid `xs` that contains zero and at
/// least two points on each side of it.
pub fn localize(xs: &[f64], values: &[f64], op: LocalizationOp) -> Result<Vec<f64>> {
    if xs.len() != values.len() || xs.len() < 2 {
        return Err(Error::Precondition("grid and samples must have equal length".into()));
    }
    let h = xs[1] - xs[0];
    if h <= 0.0 || xs.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::Precondition("grid must be uniform and increasing".into()));
    }
    let origin = xs
        .iter()
        .position(|&x| x.abs() <= 1e-12 * h)
        .ok_or_else(|| Error::Precondition("grid must contain x = 0".into()))?;
    if origin < 2 || origin + 2 >= xs.len() {
        return Err(Error::Precondition("grid too coarse: need two samples on each side of zero".into()));
    }
    let f0 = values[origin];
    let d1 = (values[origin + 1] - values[origin - 1]) / (2.0 * h);
    let d2 = (values[origin + 2] - values[origin - 2]) / (4.0 * h);
    let slope = (4.0 * d1 - d2) / 3.0;
    Ok(xs
        .iter()
        .zip(values)
        .map(|(&x, &f)| match op {
            LocalizationOp::Identity => f,
            LocalizationOp::Local => f0,
            LocalizationOp::Derivative => x * slope,
            LocalizationOp::Remainder => f - f0 - x * slope,
        })
        .collect())
}

/// Largest `|(L + D + R) f - f|` on the grid.
pub fn localization_split_deviation(xs: &[f64], values: &[f64]) -> Result<f64> {
    let parts = [LocalizationOp::Local, LocalizationOp::Derivative, LocalizationOp::Remainder]
        .map(|op| localize(xs, values, op));
    let [l, d, r] = parts;
    let (l, d, r) = (l?, d?, r?);
    Ok(values.iter().enumerate().map(|(i, f)| (l[i] + d[i] + r[i] - f).abs()).fold(0.0, f64::max))
}
