//! Resonant clusters and chains of a tree, as diagnostics.
//!
//! A candidate cluster is fixed by an exiting line and a strictly lower entering line; it
//! holds every node between them. Single-node clusters are not reported and take no part in
//! chains.

use serde::{Deserialize, Serialize};

use super::{Body, LabelledTree, LinePath};
use crate::error::{Error, Result};
use crate::frequency::{small_divisor, FrequencyVector, PartitionOfUnity};
use crate::momentum::{bracket, ModeIndex, Sign, SparseMomentum};
use crate::scalar::Real;

/// `C_1(alpha) = (2 - 2^alpha) / (2 * 3^(alpha/2) + 1)`.
pub fn cluster_constant(alpha: f64) -> f64 {
    (2.0 - 2f64.powf(alpha)) / (2.0 * 3f64.powf(alpha / 2.0) + 1.0)
}

/// Weight exponent and radius sequence `r_m` used by the size condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSettings {
    pub alpha: f64,
    pub radii: Vec<f64>,
}

impl ClusterSettings {
    /// `r_m = 2^m` for `m < count`.
    pub fn dyadic(alpha: f64, count: usize) -> Self {
        Self { alpha, radii: (0..count).map(|m| 2f64.powi(m as i32)).collect() }
    }

    /// `C_1 r_(m-1)`, unbounded for `m = 0`.
    fn bound(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Ok(f64::INFINITY);
        }
        self.radii
            .get(m - 1)
            .map(|r| cluster_constant(self.alpha) * r)
            .ok_or_else(|| Error::Config(format!("radius r_{} not provided", m - 1)))
    }
}

/// One line of the flattened tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineInfo {
    pub path: LinePath,
    pub parent: Option<usize>,
    pub mode: ModeIndex,
    pub sign: Sign,
    pub momentum: String,
    /// `omega . nu - omega_j`.
    pub divisor: f64,
    /// Scale label for lines carrying a propagator.
    pub scale: Option<usize>,
    pub leaf: bool,
    /// Line entering a counterterm node as its branch.
    pub eta_line: bool,
}

/// A cluster with its external lines, internal lines and resonant path, by line index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantCluster {
    pub exiting: usize,
    pub entering: usize,
    pub lines: Vec<usize>,
    pub path: Vec<usize>,
    /// Largest internal scale, `-1` when no internal line carries a propagator.
    pub scale: i64,
    /// Smaller of the two external scales.
    pub external_scale: usize,
    pub weight: f64,
}

/// Clusters `T_1..T_p` with `entering(T_i) = exiting(T_(i+1))`, by index into the cluster list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub clusters: Vec<usize>,
    pub links: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantClusterReport {
    pub lines: Vec<LineInfo>,
    pub clusters: Vec<ResonantCluster>,
    /// Lines that exit one cluster and enter another.
    pub resonant_lines: Vec<usize>,
    pub chains: Vec<Chain>,
}

struct Flat<'a> {
    info: Vec<LineInfo>,
    tree: Vec<&'a LabelledTree>,
    end: Vec<usize>,
}

fn flatten<'a, R: Real>(
    t: &'a LabelledTree,
    parent: Option<usize>,
    eta_line: bool,
    path: &mut LinePath,
    omega: &FrequencyVector<R>,
    partition: &PartitionOfUnity,
    flat: &mut Flat<'a>,
) -> Result<()> {
    let id = flat.info.len();
    let propagating = !t.is_leaf() && !t.is_kernel_line();
    let divisor = if t.is_leaf() { 0.0 } else { small_divisor(omega, t.mode, &t.momentum)?.to_f64() };
    flat.info.push(LineInfo {
        path: path.clone(),
        parent,
        mode: t.mode,
        sign: t.sign,
        momentum: t.momentum.to_text(),
        divisor,
        scale: propagating.then(|| partition.label(divisor.abs())),
        leaf: t.is_leaf(),
        eta_line,
    });
    flat.tree.push(t);
    flat.end.push(0);
    let is_eta = matches!(t.body, Body::Eta { .. });
    for (i, c) in t.children().into_iter().enumerate() {
        path.push(i as u8);
        flatten(c, Some(id), is_eta && i == 0, path, omega, partition, flat)?;
        path.pop();
    }
    flat.end[id] = flat.info.len();
    Ok(())
}

/// All clusters meeting the scale gap, momentum, path, counterterm-line and size conditions,
/// and the chains they form.
pub fn detect_clusters<R: Real>(
    tree: &LabelledTree,
    omega: &FrequencyVector<R>,
    partition: &PartitionOfUnity,
    settings: &ClusterSettings,
) -> Result<ResonantClusterReport> {
    let mut flat = Flat { info: Vec::new(), tree: Vec::new(), end: Vec::new() };
    flatten(tree, None, false, &mut Vec::new(), omega, partition, &mut flat)?;
    let n = flat.info.len();
    let inside = |outer: usize, x: usize| x >= outer && x < flat.end[outer];
    let weight = |j: ModeIndex| bracket(j).powf(settings.alpha);
    let external = |l: usize| flat.info[l].scale;

    let mut clusters = Vec::new();
    for exit in 0..n {
        let Some(exit_scale) = external(exit) else { continue };
        for enter in exit + 1..flat.end[exit] {
            let Some(enter_scale) = external(enter) else { continue };
            let members: Vec<usize> = (exit + 1..flat.end[exit]).filter(|&x| !inside(enter, x)).collect();
            let nodes = 1 + members.iter().filter(|&&x| !flat.info[x].leaf).count();
            if nodes < 2 {
                continue;
            }
            let low = exit_scale.min(enter_scale);
            let top = members.iter().filter_map(|&x| flat.info[x].scale).max().map_or(-1, |s| s as i64);
            if top >= low as i64 {
                continue;
            }
            // Path strictly between the external lines, read upward from the entering line.
            let mut path = Vec::new();
            let mut cur = flat.info[enter].parent;
            while let Some(p) = cur {
                if p == exit {
                    break;
                }
                path.push(p);
                cur = flat.info[p].parent;
            }
            if path.iter().any(|&p| flat.info[p].eta_line) {
                continue;
            }
            // Leaves reached from the exiting line without crossing a counterterm branch.
            let star: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&x| flat.info[x].leaf)
                .filter(|&x| {
                    let mut c = Some(x);
                    while let Some(p) = c {
                        if p == exit {
                            return true;
                        }
                        if flat.info[p].eta_line {
                            return false;
                        }
                        c = flat.info[p].parent;
                    }
                    false
                })
                .collect();
            let (te, tl) = (flat.tree[enter], flat.tree[exit]);
            let mut balance = SparseMomentum::combine(star.iter().map(|&x| (flat.info[x].sign, &flat.tree[x].momentum)));
            balance = balance.add_signed(&SparseMomentum::basis(te.mode), te.sign);
            balance = balance.add_signed(&SparseMomentum::basis(tl.mode), tl.sign.flip());
            if !balance.is_zero() {
                continue;
            }
            let shifted = |t: &LabelledTree| t.momentum.sub(&SparseMomentum::basis(t.mode)).signed(t.sign);
            let entering_shift = shifted(te);
            if path.iter().any(|&p| shifted(flat.tree[p]) == entering_shift) {
                continue;
            }
            let bound = settings.bound(partition.scales.m[low])?;
            let j_value = star.iter().map(|&x| weight(flat.info[x].mode)).sum::<f64>() - weight(tl.mode) + weight(te.mode);
            if j_value >= bound {
                continue;
            }
            let branch_ok = members.iter().chain(std::iter::once(&exit)).all(|&x| match &flat.tree[x].body {
                Body::Eta { branch, .. } if x != enter => branch.star_weight(settings.alpha) < bound,
                _ => true,
            });
            if !branch_ok {
                continue;
            }
            let lines: Vec<usize> = members.iter().copied().filter(|&x| x != enter && !flat.info[x].leaf).collect();
            clusters.push(ResonantCluster {
                exiting: exit,
                entering: enter,
                lines,
                path,
                scale: top,
                external_scale: low,
                weight: j_value,
            });
        }
    }

    let mut resonant: Vec<usize> =
        clusters.iter().map(|c| c.entering).filter(|l| clusters.iter().any(|d| d.exiting == *l)).collect();
    resonant.sort_unstable();
    resonant.dedup();

    let mut chains = Vec::new();
    for (start, c) in clusters.iter().enumerate() {
        if resonant.contains(&c.exiting) {
            continue;
        }
        extend_chain(&clusters, &resonant, vec![start], &mut chains);
    }
    Ok(ResonantClusterReport { lines: flat.info, clusters, resonant_lines: resonant, chains })
}

fn extend_chain(clusters: &[ResonantCluster], resonant: &[usize], current: Vec<usize>, out: &mut Vec<Chain>) {
    let last = &clusters[*current.last().unwrap_or(&0)];
    if !resonant.contains(&last.entering) {
        if current.len() >= 2 {
            let links = current[1..].iter().map(|&i| clusters[i].exiting).collect();
            out.push(Chain { clusters: current, links });
        }
        return;
    }
    for (i, c) in clusters.iter().enumerate() {
        if c.exiting == last.entering && !current.contains(&i) {
            let mut next = current.clone();
            next.push(i);
            extend_chain(clusters, resonant, next, out);
        }
    }
}
