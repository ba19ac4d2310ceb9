//! Bottom-up enumeration of tree families, memoized by order, root sign and extra leaf modes.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::LabelledTree;
use crate::error::{Error, Result};
use crate::momentum::{ModeIndex, Sign, SparseMomentum, QUINTIC_SIGNS};

/// Default highest order accepted by [`TreeEnumerator`].
pub const DEFAULT_TREE_CAP: usize = 2;

/// Which tree family to enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Counterterms expanded into kernel-rooted branches.
    Expanded,
    /// Counterterms kept as numeric nodes.
    Unexpanded,
}

#[derive(Default)]
struct Level {
    nonkernel: Vec<Arc<LabelledTree>>,
    /// Trees rooted on the kernel line `e_j` above a quintic node, by `j`.
    kernel: BTreeMap<ModeIndex, Vec<Arc<LabelledTree>>>,
}

type LevelKey = (usize, Sign, Vec<ModeIndex>);

/// Memoizing generator of all admissible trees with leaves on a fixed mode set.
///
/// Inside an expanded counterterm branch at a mode outside the leaf set, that mode is added to
/// the leaf set of the branch; such leaves carry the removable-singularity limit in values.
pub struct TreeEnumerator {
    leaf_modes: Vec<ModeIndex>,
    family: Family,
    cap: usize,
    memo: HashMap<LevelKey, Arc<Level>>,
}

impl TreeEnumerator {
    pub fn new(leaf_modes: &[ModeIndex], family: Family) -> Self {
        Self::with_cap(leaf_modes, family, DEFAULT_TREE_CAP)
    }

    pub fn with_cap(leaf_modes: &[ModeIndex], family: Family, cap: usize) -> Self {
        let mut modes = leaf_modes.to_vec();
        modes.sort_unstable();
        modes.dedup();
        Self { leaf_modes: modes, family, cap, memo: HashMap::new() }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn family(&self) -> Family {
        self.family
    }

    fn check_cap(&self, k: usize) -> Result<()> {
        if k > self.cap {
            return Err(Error::OrderCap { order: k, cap: self.cap });
        }
        Ok(())
    }

    /// All trees of order `k` rooted on the line `(j, nu, sign)`, each exactly once.
    pub fn enumerate(&mut self, k: usize, j: ModeIndex, nu: &SparseMomentum, sign: Sign) -> Result<Vec<Arc<LabelledTree>>> {
        self.check_cap(k)?;
        if nu.total_charge() != 1 || nu.pi() != j {
            return Ok(Vec::new());
        }
        if k == 0 {
            let present = nu.is_basis(j) && self.leaf_modes.contains(&j);
            return Ok(if present { vec![LabelledTree::leaf(j, sign)] } else { Vec::new() });
        }
        if nu.is_basis(j) {
            return self.kernel(k, j, sign);
        }
        Ok(self.nonkernel(k, sign)?.into_iter().filter(|t| &t.momentum == nu).collect())
    }

    /// Order-`k` trees whose root line is not a kernel line.
    pub fn nonkernel(&mut self, k: usize, sign: Sign) -> Result<Vec<Arc<LabelledTree>>> {
        self.check_cap(k)?;
        Ok(self.level(k, sign, &[]).nonkernel.clone())
    }

    /// Order-`k` trees rooted on the kernel line `e_j` above a quintic node.
    pub fn kernel(&mut self, k: usize, j: ModeIndex, sign: Sign) -> Result<Vec<Arc<LabelledTree>>> {
        self.check_cap(k)?;
        Ok(self.level(k, sign, &[]).kernel.get(&j).cloned().unwrap_or_default())
    }

    /// Modes `j` with at least one kernel-rooted tree of order `k`.
    pub fn kernel_modes(&mut self, k: usize, sign: Sign) -> Result<Vec<ModeIndex>> {
        self.check_cap(k)?;
        Ok(self.level(k, sign, &[]).kernel.keys().copied().collect())
    }

    fn leaves(&self, sign: Sign, extras: &[ModeIndex]) -> Vec<Arc<LabelledTree>> {
        let mut modes: Vec<ModeIndex> = self.leaf_modes.iter().chain(extras).copied().collect();
        modes.sort_unstable();
        modes.dedup();
        modes.into_iter().map(|j| LabelledTree::leaf(j, sign)).collect()
    }

    fn level(&mut self, k: usize, sign: Sign, extras: &[ModeIndex]) -> Arc<Level> {
        let key = (k, sign, extras.to_vec());
        if let Some(l) = self.memo.get(&key) {
            return l.clone();
        }
        let mut level = Level::default();
        let push = |t: Arc<LabelledTree>, level: &mut Level| {
            if t.is_kernel_line() {
                level.kernel.entry(t.mode).or_default().push(t);
            } else {
                level.nonkernel.push(t);
            }
        };

        for parts in compositions(k - 1) {
            let options: Vec<Vec<Arc<LabelledTree>>> = (0..5)
                .map(|i| {
                    let s = QUINTIC_SIGNS[i].times(sign);
                    if parts[i] == 0 {
                        self.leaves(s, extras)
                    } else {
                        self.level(parts[i], s, extras).nonkernel.clone()
                    }
                })
                .collect();
            let mut pick: Vec<Arc<LabelledTree>> = Vec::with_capacity(5);
            product(&options, &mut pick, &mut |chosen| {
                let children: [Arc<LabelledTree>; 5] = std::array::from_fn(|i| chosen[i].clone());
                push(LabelledTree::quintic_unchecked(sign, children), &mut level);
            });
        }

        for k1 in 1..k {
            let rests = self.level(k - k1, sign, extras).nonkernel.clone();
            for rest in rests {
                match self.family {
                    Family::Expanded => {
                        let mut inner = extras.to_vec();
                        if !self.leaf_modes.contains(&rest.mode) && !inner.contains(&rest.mode) {
                            inner.push(rest.mode);
                            inner.sort_unstable();
                        }
                        let branches = self.level(k1, sign, &inner).kernel.get(&rest.mode).cloned().unwrap_or_default();
                        for b in branches {
                            push(LabelledTree::eta_unchecked(b, rest.clone()), &mut level);
                        }
                    }
                    Family::Unexpanded => push(LabelledTree::counter_unchecked(k1, rest.clone()), &mut level),
                }
            }
        }

        let level = Arc::new(level);
        self.memo.insert(key, level.clone());
        level
    }
}

/// Ordered 5-part compositions of `n` into non-negative parts.
fn compositions(n: usize) -> Vec<[usize; 5]> {
    let mut out = Vec::new();
    for a in 0..=n {
        for b in 0..=n - a {
            for c in 0..=n - a - b {
                for d in 0..=n - a - b - c {
                    out.push([a, b, c, d, n - a - b - c - d]);
                }
            }
        }
    }
    out
}

fn product<T: Clone>(options: &[Vec<T>], pick: &mut Vec<T>, f: &mut impl FnMut(&[T])) {
    if pick.len() == options.len() {
        f(pick);
        return;
    }
    for o in &options[pick.len()] {
        pick.push(o.clone());
        product(options, pick, f);
        pick.pop();
    }
}
