//! Fallen-leaf marks on trees: the leaf factor `c^sigma'_j'` replaced by one, values with the
//! shifted resonant path, and highlighted export.

use std::sync::Arc;

use crate::error::Result;
use crate::frequency::small_divisor;
use crate::momentum::{ModeIndex, Sign};
use crate::scalar::{Coeff, Cx, Real};
use crate::trees::{tree_value_with, LabelledTree, LinePath, MarkedLeaf, TreeContext};

/// A tree together with one designated leaf; a view, the tree is shared.
#[derive(Clone, Debug, PartialEq)]
pub struct FallenLeafMark {
    pub tree: Arc<LabelledTree>,
    pub leaf: LinePath,
}

/// One mark per leaf carrying `(j', sigma')`, anywhere in the tree.
pub fn mark_fallen_leaf(tree: &Arc<LabelledTree>, mode: ModeIndex, sign: Sign) -> Vec<FallenLeafMark> {
    tree.leaves()
        .into_iter()
        .filter(|(_, l)| l.mode == mode && l.sign == sign)
        .map(|(path, _)| FallenLeafMark { tree: tree.clone(), leaf: path })
        .collect()
}

impl FallenLeafMark {
    pub fn leaf_sign(&self) -> Sign {
        self.tree.at(&self.leaf).map_or(Sign::Plus, |l| l.sign)
    }

    /// Lines strictly between the marked leaf and the root, from the root downward.
    pub fn path_lines(&self) -> Vec<&LabelledTree> {
        (1..self.leaf.len()).filter_map(|n| self.tree.at(&self.leaf[..n])).collect()
    }

    /// Value with the marked leaf factor set to one and path lines shifted by `sigma_l sigma' x`.
    pub fn value<R: Real>(&self, ctx: &TreeContext<'_, R>, x: &R) -> Result<Cx<R>> {
        tree_value_with(&self.tree, ctx, Some(&MarkedLeaf { path: &self.leaf, shift: x.clone() }))
    }

    /// `d/dx` of [`FallenLeafMark::value`], from the logarithmic derivative of the path propagators.
    pub fn shift_derivative<R: Real>(&self, ctx: &TreeContext<'_, R>, x: &R) -> Result<Cx<R>> {
        let value = self.value(ctx, x)?;
        let fallen = self.leaf_sign();
        let mut log_derivative = R::zero();
        for line in self.path_lines() {
            if line.is_kernel_line() {
                continue;
            }
            let s = R::from_int(line.sign.times(fallen).value());
            let d = small_divisor(ctx.omega, line.mode, &line.momentum)? + s.clone() * x.clone();
            log_derivative = log_derivative - s / d;
        }
        Ok(Coeff::<R>::scale(&value, &log_derivative))
    }

    pub fn to_dot(&self) -> String {
        self.tree.to_dot(Some(&self.leaf))
    }
}
