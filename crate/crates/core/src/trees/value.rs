//! Tree values: leaf amplitudes, node factors and propagators `1/(omega . nu - omega_j)`.

use smallvec::SmallVec;

use super::{Body, LabelledTree};
use crate::error::{Error, Result};
use crate::frequency::{small_divisor, FrequencyVector};
use crate::lindstedt::{AmplitudeConfig, CountertermTable};
use crate::momentum::{ModeIndex, Sign};
use crate::scalar::{signed_value, Coeff, Cx, Real};

/// Data a tree is evaluated against.
#[derive(Clone, Copy, Debug)]
pub struct TreeContext<'a, R: Real> {
    pub amplitudes: &'a AmplitudeConfig<R>,
    pub omega: &'a FrequencyVector<R>,
    /// Counterterm values for numeric counterterm nodes.
    pub counterterms: Option<&'a CountertermTable<R>>,
}

/// A designated leaf whose factor is replaced by one, with the lines between it and the root
/// shifted to `x_l + sigma_l sigma' x`.
#[derive(Clone, Debug)]
pub struct MarkedLeaf<'a, R: Real> {
    pub path: &'a [u8],
    pub shift: R,
}

/// Product `coeff * prod c_j^a conj(c_j)^b` over modes outside the amplitude support.
struct Monomial<R: Real> {
    coeff: Cx<R>,
    powers: SmallVec<[(ModeIndex, Sign, i32); 2]>,
}

impl<R: Real> Monomial<R> {
    fn one() -> Self {
        Self { coeff: Cx::new(R::one(), R::zero()), powers: SmallVec::new() }
    }

    fn bump(&mut self, j: ModeIndex, s: Sign, by: i32) {
        match self.powers.iter_mut().find(|p| p.0 == j && p.1 == s) {
            Some(p) => p.2 += by,
            None => self.powers.push((j, s, by)),
        }
    }

    fn absorb(&mut self, other: Monomial<R>) {
        self.coeff = self.coeff.mul_ref(&other.coeff);
        for (j, s, p) in other.powers {
            self.bump(j, s, p);
        }
    }

    fn finish(self) -> Result<Cx<R>> {
        if self.powers.iter().any(|p| p.2 < 0) {
            return Err(Error::Precondition("tree value is singular at a vanishing amplitude".into()));
        }
        if self.powers.iter().any(|p| p.2 > 0) {
            return Ok(Coeff::<R>::zero());
        }
        Ok(self.coeff)
    }
}

/// Value of a tree at amplitudes `c` and frequencies `omega`.
///
/// Counterterm branches at modes with `c_j = 0` contribute their limit as `c_j -> 0`.
pub fn tree_value<R: Real>(tree: &LabelledTree, amplitudes: &AmplitudeConfig<R>, omega: &FrequencyVector<R>) -> Result<Cx<R>> {
    tree_value_with(tree, &TreeContext { amplitudes, omega, counterterms: None }, None)
}

/// [`tree_value`] with numeric counterterms and an optional marked leaf.
pub fn tree_value_with<R: Real>(tree: &LabelledTree, ctx: &TreeContext<'_, R>, mark: Option<&MarkedLeaf<'_, R>>) -> Result<Cx<R>> {
    if let Some(m) = mark {
        match tree.at(m.path) {
            Some(l) if l.is_leaf() => {}
            _ => return Err(Error::Precondition(format!("no leaf at path {:?}", m.path))),
        }
    }
    let fallen = mark.map(|m| tree.at(m.path).map_or(Sign::Plus, |l| l.sign));
    eval(tree, ctx, mark.map(|m| (m.path, fallen.unwrap_or(Sign::Plus), &m.shift)), true)?.finish()
}

fn eval<R: Real>(
    tree: &LabelledTree,
    ctx: &TreeContext<'_, R>,
    mark: Option<(&[u8], Sign, &R)>,
    root: bool,
) -> Result<Monomial<R>> {
    let mut m = Monomial::one();
    let on_path = mark.is_some_and(|(p, _, _)| !p.is_empty());
    match &tree.body {
        Body::Leaf => {
            if mark.is_some() {
                return Ok(m);
            }
            match ctx.amplitudes.get(tree.mode) {
                Some(c) => m.coeff = signed_value(c, tree.sign),
                None => m.bump(tree.mode, tree.sign, 1),
            }
            return Ok(m);
        }
        Body::Quintic(_) => {}
        Body::Eta { .. } => match ctx.amplitudes.get(tree.mode) {
            Some(c) => m.coeff = -(Cx::new(R::one(), R::zero()) / signed_value(c, tree.sign)),
            None => {
                m.coeff = -Cx::new(R::one(), R::zero());
                m.bump(tree.mode, tree.sign, -1);
            }
        },
        Body::Counter { order, .. } => {
            let table = ctx
                .counterterms
                .ok_or_else(|| Error::Precondition("numeric counterterm node without a counterterm table".into()))?;
            let eta = table
                .get(*order, tree.mode)
                .ok_or_else(|| Error::Precondition(format!("missing counterterm at order {order}, mode {}", tree.mode)))?;
            m.coeff = Cx::new(eta.clone(), R::zero());
        }
    }
    if !tree.is_kernel_line() {
        let mut x = small_divisor(ctx.omega, tree.mode, &tree.momentum)?;
        if let (true, false, Some((_, fallen, shift))) = (on_path, root, mark) {
            let s = R::from_int(tree.sign.times(fallen).value());
            x = x + s * shift.clone();
        }
        if x.is_zero() {
            return Err(Error::DivisorTooSmall { j: tree.mode, nu: Box::new(tree.momentum.clone()), value: 0.0, floor: 0.0 });
        }
        m.coeff = Coeff::<R>::div_real(&m.coeff, &x);
    }
    for (i, c) in tree.children().into_iter().enumerate() {
        let sub = match mark {
            Some((p, s, x)) if p.first() == Some(&(i as u8)) => Some((&p[1..], s, x)),
            _ => None,
        };
        m.absorb(eval(c, ctx, sub, false)?);
    }
    Ok(m)
}
