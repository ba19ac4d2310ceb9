//! Labelled trees of the formal expansion: construction, invariants, enumeration at low order,
//! values, resonant clusters and export.
//!
//! Two families share one type. Expanded trees carry counterterms as two-line nodes whose
//! branch is itself a tree rooted on a kernel line. Unexpanded trees carry them as
//! one-line nodes with a numeric factor.

mod clusters;
mod enumerate;
mod value;

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use clusters::{cluster_constant, detect_clusters, ClusterSettings, Chain, LineInfo, ResonantCluster, ResonantClusterReport};
pub use enumerate::{Family, TreeEnumerator, DEFAULT_TREE_CAP};
pub use value::{tree_value, tree_value_with, MarkedLeaf, TreeContext};

use crate::error::{Error, Result};
use crate::momentum::{bracket, ModeIndex, Sign, SparseMomentum, QUINTIC_SIGNS};

/// Node below a line.
#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    Leaf,
    /// Five entering lines with signs `sigma * (+,-,+,-,+)`.
    Quintic([Arc<LabelledTree>; 5]),
    /// Counterterm node: `branch` sits on a kernel line, `rest` has the same labels as the node.
    Eta { branch: Arc<LabelledTree>, rest: Arc<LabelledTree> },
    /// Counterterm `eta^(order)` used as a number, above a line with the same labels.
    Counter { order: usize, child: Arc<LabelledTree> },
}

/// A tree identified with its root line: labels `(j, sigma, nu)`, order and the node below.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelledTree {
    pub mode: ModeIndex,
    pub sign: Sign,
    pub momentum: SparseMomentum,
    pub order: usize,
    pub body: Body,
}

/// Child index path from the root to a line.
pub type LinePath = Vec<u8>;

/// Serializable nested form of a tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub kind: String,
    pub mode: ModeIndex,
    pub sign: Sign,
    pub momentum: String,
    pub order: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counter_order: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub children: Vec<TreeRecord>,
}

impl LabelledTree {
    pub fn leaf(mode: ModeIndex, sign: Sign) -> Arc<Self> {
        Arc::new(Self { mode, sign, momentum: SparseMomentum::basis(mode), order: 0, body: Body::Leaf })
    }

    /// Quintic node with the given entering lines; the line momentum is
    /// `nu_1 - nu_2 + nu_3 - nu_4 + nu_5`.
    pub fn quintic(sign: Sign, children: [Arc<Self>; 5]) -> Result<Arc<Self>> {
        for (i, c) in children.iter().enumerate() {
            if c.sign != QUINTIC_SIGNS[i].times(sign) {
                return Err(Error::Precondition(format!("entering line {i} has sign {}", c.sign.symbol())));
            }
            if c.is_kernel_line() {
                return Err(Error::Precondition(format!("entering line {i} is a kernel line")));
            }
        }
        Ok(Self::quintic_unchecked(sign, children))
    }

    pub(crate) fn quintic_unchecked(sign: Sign, children: [Arc<Self>; 5]) -> Arc<Self> {
        let momentum = SparseMomentum::combine(children.iter().zip(QUINTIC_SIGNS).map(|(c, s)| (s, &c.momentum)));
        let order = 1 + children.iter().map(|c| c.order).sum::<usize>();
        Arc::new(Self { mode: momentum.pi(), sign, momentum, order, body: Body::Quintic(children) })
    }

    /// Two-line counterterm node joining a kernel-rooted `branch` with a non-kernel `rest`.
    pub fn eta(branch: Arc<Self>, rest: Arc<Self>) -> Result<Arc<Self>> {
        if rest.is_leaf() || rest.is_kernel_line() {
            return Err(Error::Precondition("the lower line of a counterterm node must be a non-kernel line".into()));
        }
        if !branch.is_kernel_line() || !matches!(branch.body, Body::Quintic(_)) {
            return Err(Error::Precondition("counterterm branch must be rooted on a kernel line above a quintic node".into()));
        }
        if branch.mode != rest.mode || branch.sign != rest.sign {
            return Err(Error::Precondition("counterterm branch labels differ from the node labels".into()));
        }
        Ok(Self::eta_unchecked(branch, rest))
    }

    pub(crate) fn eta_unchecked(branch: Arc<Self>, rest: Arc<Self>) -> Arc<Self> {
        Arc::new(Self {
            mode: rest.mode,
            sign: rest.sign,
            momentum: rest.momentum.clone(),
            order: branch.order + rest.order,
            body: Body::Eta { branch, rest },
        })
    }

    /// Numeric counterterm node; the child is a non-kernel line or, at the root only, a leaf.
    pub fn counter(order: usize, child: Arc<Self>) -> Result<Arc<Self>> {
        if order == 0 {
            return Err(Error::Precondition("counterterm order must be positive".into()));
        }
        if child.is_kernel_line() {
            return Err(Error::Precondition("counterterm node above a kernel line".into()));
        }
        Ok(Self::counter_unchecked(order, child))
    }

    pub(crate) fn counter_unchecked(order: usize, child: Arc<Self>) -> Arc<Self> {
        Arc::new(Self {
            mode: child.mode,
            sign: child.sign,
            momentum: child.momentum.clone(),
            order: order + child.order,
            body: Body::Counter { order, child },
        })
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.body, Body::Leaf)
    }

    /// Non-leaf line with `nu = e_j`; it carries no propagator.
    pub fn is_kernel_line(&self) -> bool {
        !self.is_leaf() && self.momentum.is_basis(self.mode)
    }

    /// Entering lines in child-index order.
    pub fn children(&self) -> Vec<&Arc<Self>> {
        match &self.body {
            Body::Leaf => vec![],
            Body::Quintic(c) => c.iter().collect(),
            Body::Eta { branch, rest } => vec![branch, rest],
            Body::Counter { child, .. } => vec![child],
        }
    }

    pub fn child(&self, i: usize) -> Option<&Self> {
        let c = match (&self.body, i) {
            (Body::Quintic(c), i) if i < 5 => &c[i],
            (Body::Eta { branch, .. }, 0) => branch,
            (Body::Eta { rest, .. }, 1) => rest,
            (Body::Counter { child, .. }, 0) => child,
            _ => return None,
        };
        Some(c.as_ref())
    }

    /// Line at a child-index path.
    pub fn at(&self, path: &[u8]) -> Option<&Self> {
        let mut cur = self;
        for &i in path {
            cur = cur.child(i as usize)?;
        }
        Some(cur)
    }

    /// All leaves with their paths, in depth-first order.
    pub fn leaves(&self) -> Vec<(LinePath, &Self)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut Vec::new(), false, &mut out);
        out
    }

    /// Leaves reached from the root without crossing a counterterm branch.
    pub fn star_leaves(&self) -> Vec<(LinePath, &Self)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut Vec::new(), true, &mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, path: &mut LinePath, skip_branches: bool, out: &mut Vec<(LinePath, &'a Self)>) {
        if self.is_leaf() {
            out.push((path.clone(), self));
            return;
        }
        for (i, c) in self.children().into_iter().enumerate() {
            if skip_branches && i == 0 && matches!(self.body, Body::Eta { .. }) {
                continue;
            }
            path.push(i as u8);
            c.collect_leaves(path, skip_branches, out);
            path.pop();
        }
    }

    /// Number of non-leaf nodes.
    pub fn node_count(&self) -> usize {
        if self.is_leaf() {
            0
        } else {
            1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
        }
    }

    /// The same tree with every sign flipped.
    pub fn conjugate(&self) -> Arc<Self> {
        let body = match &self.body {
            Body::Leaf => Body::Leaf,
            Body::Quintic(c) => Body::Quintic([0, 1, 2, 3, 4].map(|i| c[i].conjugate())),
            Body::Eta { branch, rest } => Body::Eta { branch: branch.conjugate(), rest: rest.conjugate() },
            Body::Counter { order, child } => Body::Counter { order: *order, child: child.conjugate() },
        };
        Arc::new(Self { mode: self.mode, sign: self.sign.flip(), momentum: self.momentum.clone(), order: self.order, body })
    }

    /// Structural violations: signs, conservation, counterterm line rules, kernel rule, orders.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.check_node(&mut Vec::new(), true, &mut out);
        let star: SparseMomentum =
            SparseMomentum::combine(self.star_leaves().iter().map(|(_, l)| (l.sign, &l.momentum)));
        if star != self.momentum.signed(self.sign) {
            out.push(format!("root: sigma nu = [{}] but the leaves give [{star}]", self.momentum.signed(self.sign)));
        }
        if self.momentum.pi() != self.mode {
            out.push(format!("root: pi(nu) = {} differs from j = {}", self.momentum.pi(), self.mode));
        }
        if !self.is_leaf() && self.node_count() + 1 > 2 * self.order {
            out.push(format!("node count {} exceeds 2k - 1 = {}", self.node_count(), 2 * self.order - 1));
        }
        out
    }

    fn check_node(&self, path: &mut LinePath, root: bool, out: &mut Vec<String>) {
        let at = |p: &LinePath| format!("line {p:?}");
        match &self.body {
            Body::Leaf => {
                if self.momentum != SparseMomentum::basis(self.mode) || self.order != 0 {
                    out.push(format!("{}: leaf line labels", at(path)));
                }
            }
            Body::Quintic(children) => {
                let sum = SparseMomentum::combine(children.iter().zip(QUINTIC_SIGNS).map(|(c, s)| (s, &c.momentum)));
                if sum != self.momentum {
                    out.push(format!("{}: momentum not conserved", at(path)));
                }
                if self.order != 1 + children.iter().map(|c| c.order).sum::<usize>() {
                    out.push(format!("{}: order mismatch", at(path)));
                }
                for (i, c) in children.iter().enumerate() {
                    if c.sign != QUINTIC_SIGNS[i].times(self.sign) {
                        out.push(format!("{}: sign of entering line {i}", at(path)));
                    }
                    if c.is_kernel_line() {
                        out.push(format!("{}: entering line {i} is a kernel line", at(path)));
                    }
                }
            }
            Body::Eta { branch, rest } => {
                if (branch.mode, branch.sign) != (self.mode, self.sign) || !branch.is_kernel_line() {
                    out.push(format!("{}: counterterm line labels", at(path)));
                }
                if (rest.mode, rest.sign, &rest.momentum) != (self.mode, self.sign, &self.momentum) || rest.is_kernel_line() {
                    out.push(format!("{}: counterterm node labels", at(path)));
                }
                if self.order != branch.order + rest.order {
                    out.push(format!("{}: order mismatch", at(path)));
                }
            }
            Body::Counter { order, child } => {
                if (child.mode, child.sign, &child.momentum) != (self.mode, self.sign, &self.momentum) {
                    out.push(format!("{}: counterterm node labels", at(path)));
                }
                if child.is_kernel_line() {
                    out.push(format!("{}: counterterm node above a kernel line", at(path)));
                }
                if child.is_leaf() && !root {
                    out.push(format!("{}: counterterm node above a leaf away from the root", at(path)));
                }
                if self.order != order + child.order {
                    out.push(format!("{}: order mismatch", at(path)));
                }
            }
        }
        for (i, c) in self.children().into_iter().enumerate() {
            path.push(i as u8);
            c.check_node(path, false, out);
            path.pop();
        }
    }

    /// Leaf-count law at a kernel root: for every mode `j'`, the leaves reached without crossing
    /// a branch satisfy `#(j', sigma) = #(j', -sigma) + [j' = j]`.
    pub fn leaf_law_holds(&self) -> bool {
        if !self.momentum.is_basis(self.mode) {
            return true;
        }
        let mut net = std::collections::BTreeMap::<ModeIndex, i64>::new();
        for (_, l) in self.star_leaves() {
            *net.entry(l.mode).or_default() += if l.sign == self.sign { 1 } else { -1 };
        }
        *net.entry(self.mode).or_default() -= 1;
        net.values().all(|&v| v == 0)
    }

    /// `sum <j_lambda>^alpha` over the leaves reached without crossing a branch, minus `<j>^alpha`.
    pub fn star_weight(&self, alpha: f64) -> f64 {
        self.star_leaves().iter().map(|(_, l)| bracket(l.mode).powf(alpha)).sum::<f64>() - bracket(self.mode).powf(alpha)
    }

    pub fn to_record(&self) -> TreeRecord {
        let (kind, counter_order) = match &self.body {
            Body::Leaf => ("leaf", None),
            Body::Quintic(_) => ("quintic", None),
            Body::Eta { .. } => ("eta", None),
            Body::Counter { order, .. } => ("counter", Some(*order)),
        };
        TreeRecord {
            kind: kind.into(),
            mode: self.mode,
            sign: self.sign,
            momentum: self.momentum.to_text(),
            order: self.order,
            counter_order,
            children: self.children().iter().map(|c| c.to_record()).collect(),
        }
    }

    /// Graphviz description; the line at `highlight` is drawn in red.
    pub fn to_dot(&self, highlight: Option<&[u8]>) -> String {
        let mut out = String::from("digraph tree {\n  rankdir=RL;\n  root [shape=point];\n");
        let mut next = 0usize;
        self.dot_lines(&mut out, "root", &mut Vec::new(), highlight, &mut next);
        out.push_str("}\n");
        out
    }

    fn dot_lines(&self, out: &mut String, parent: &str, path: &mut LinePath, highlight: Option<&[u8]>, next: &mut usize) {
        let id = format!("n{next}");
        *next += 1;
        let (shape, text) = match &self.body {
            Body::Leaf => ("box", format!("{}{}", self.mode, self.sign.symbol())),
            Body::Quintic(_) => ("circle", String::new()),
            Body::Eta { .. } => ("diamond", "eta".to_string()),
            Body::Counter { order, .. } => ("square", format!("eta{order}")),
        };
        let marked = highlight == Some(path.as_slice());
        let style = if marked { ", style=filled, fillcolor=red" } else { "" };
        let _ = writeln!(out, "  {id} [shape={shape}, label=\"{text}\"{style}];");
        let colour = if marked { ", color=red" } else { "" };
        let _ = writeln!(
            out,
            "  {id} -> {parent} [label=\"{} {} [{}]\"{colour}];",
            self.mode,
            self.sign.symbol(),
            self.momentum
        );
        for (i, c) in self.children().into_iter().enumerate() {
            path.push(i as u8);
            c.dot_lines(out, &id, path, highlight, next);
            path.pop();
        }
    }
}
