//! Tree enumeration, values against the order-by-order engine, invariants, clusters and marks.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::*;
use num_traits::Zero;
use qnls_core::frequency::{FrequencyVector, PartitionOfUnity, ScaleSequence};
use qnls_core::lindstedt::{AmplitudeConfig, Engine, EngineSettings};
use qnls_core::momentum::{Sign, SparseMomentum};
use qnls_core::scalar::{cx, Coeff, Cx};
use qnls_core::trees::{detect_clusters, tree_value, ClusterSettings, Family, LabelledTree, TreeContext, TreeEnumerator};
use qnls_core::treesupport::mark_fallen_leaf;

const SUPPORT: [i64; 3] = [-2, 0, 1];

fn oracle_setup(seed: u64) -> (AmplitudeConfig<Q>, FrequencyVector<Q>) {
    let mut g = rng(seed);
    let c = random_amplitudes(&mut g, &SUPPORT, 2);
    let w = generic_omega(&mut g, 40);
    (c, w)
}

#[test]
fn tree_sums_match_engine_through_order_two() {
    let (c, w) = oracle_setup(3);
    let mut engine = Engine::run(&c, &w, EngineSettings::with_order(2)).unwrap();
    let table = engine.coefficients();
    let mut trees = TreeEnumerator::new(&SUPPORT, Family::Expanded);
    for k in 1..=2 {
        let mut sums: BTreeMap<SparseMomentum, Cx<Q>> = BTreeMap::new();
        for t in trees.nonkernel(k, Sign::Plus).unwrap() {
            let v = tree_value(&t, &c, &w).unwrap();
            sums.entry(t.momentum.clone()).or_insert_with(Coeff::<Q>::zero).add_assign_ref(&v);
        }
        let mut keys: Vec<&SparseMomentum> = sums.keys().chain(table.orders[k].keys()).collect();
        keys.sort();
        keys.dedup();
        for nu in keys {
            let tree_sum = sums.get(nu).cloned().unwrap_or_else(Coeff::<Q>::zero);
            let coeff = table.orders[k].get(nu).cloned().unwrap_or_else(Coeff::<Q>::zero);
            assert_eq!(tree_sum, coeff, "order {k}, nu [{nu}]");
        }
        for j in -6..=6 {
            let kernel: Cx<Q> = trees
                .kernel(k, j, Sign::Plus)
                .unwrap()
                .iter()
                .map(|t| tree_value(t, &c, &w).unwrap())
                .fold(Coeff::<Q>::zero(), |mut a, v| {
                    a.add_assign_ref(&v);
                    a
                });
            assert_eq!(kernel, engine.kernel_projection(k - 1, j).unwrap(), "kernel order {k}, mode {j}");
        }
    }
}

#[test]
fn single_node_count_matches_direct_enumeration() {
    let mut trees = TreeEnumerator::new(&SUPPORT, Family::Expanded);
    let all = trees.nonkernel(1, Sign::Plus).unwrap();
    let mut direct: BTreeMap<SparseMomentum, usize> = BTreeMap::new();
    for a in SUPPORT {
        for b in SUPPORT {
            for c in SUPPORT {
                for d in SUPPORT {
                    for e in SUPPORT {
                        let nu = SparseMomentum::from_pairs([(a, 1), (b, -1), (c, 1), (d, -1), (e, 1)]);
                        if !nu.is_basis(nu.pi()) {
                            *direct.entry(nu).or_default() += 1;
                        }
                    }
                }
            }
        }
    }
    for (nu, count) in &direct {
        let got = trees.enumerate(1, nu.pi(), nu, Sign::Plus).unwrap();
        assert_eq!(got.len(), *count, "nu [{nu}]");
    }
    assert_eq!(all.len(), direct.values().sum::<usize>());
}

#[test]
fn kernel_count_matches_first_order_monomials() {
    let mut trees = TreeEnumerator::new(&SUPPORT, Family::Expanded);
    let m = SUPPORT.len();
    // 1 + 6 (M - 1) + 3 (M - 1) + 12 (M - 1)(M - 2) / 2 ordered quintuples.
    let expected = 1 + 9 * (m - 1) + 6 * (m - 1) * (m - 2);
    for j in SUPPORT {
        assert_eq!(trees.kernel(1, j, Sign::Plus).unwrap().len(), expected);
    }
    assert!(trees.kernel(1, 5, Sign::Plus).unwrap().is_empty());
}

#[test]
fn enumerated_trees_satisfy_invariants() {
    let mut trees = TreeEnumerator::new(&[-1, 0, 2], Family::Expanded);
    let mut eta_nodes = 0;
    for k in 1..=2 {
        for sign in [Sign::Plus, Sign::Minus] {
            let mut all = trees.nonkernel(k, sign).unwrap();
            for j in trees.kernel_modes(k, sign).unwrap() {
                all.extend(trees.kernel(k, j, sign).unwrap());
            }
            for t in all {
                assert!(t.invariant_violations().is_empty(), "{:?}", t.invariant_violations());
                assert!(t.leaf_law_holds());
                assert!(t.node_count() < 2 * k);
                assert_eq!(t.order, k);
                eta_nodes += usize::from(matches!(t.body, qnls_core::trees::Body::Eta { .. }));
            }
        }
    }
    assert!(eta_nodes > 0);
}

#[test]
fn unexpanded_family_has_counter_nodes() {
    let mut trees = TreeEnumerator::new(&[0, 1], Family::Unexpanded);
    let two = trees.nonkernel(2, Sign::Plus).unwrap();
    assert!(two.iter().any(|t| matches!(t.body, qnls_core::trees::Body::Counter { .. })));
    assert!(two.iter().all(|t| t.invariant_violations().is_empty()));
}

#[test]
fn single_node_value_and_conjugation() {
    let (c, w) = oracle_setup(9);
    let t = single_node(Sign::Plus, [1, -2, 0, 0, 1]);
    assert_eq!(t.momentum, SparseMomentum::from_pairs([(1, 2), (-2, -1)]));
    let get = |j: i64| c.get(j).unwrap().clone();
    let num = get(1) * get(-2).conj() * get(0) * get(0).conj() * get(1);
    let x = w.dot(&t.momentum).unwrap() - w.omega(t.mode).unwrap();
    assert_eq!(tree_value(&t, &c, &w).unwrap(), num / cx(x, Q::zero()));
    let flipped = t.conjugate();
    assert_eq!(tree_value(&flipped, &c, &w).unwrap(), tree_value(&t, &c, &w).unwrap().conj());
}

fn single_node(sign: Sign, leaves: [i64; 5]) -> Arc<LabelledTree> {
    let children: [Arc<LabelledTree>; 5] =
        std::array::from_fn(|i| LabelledTree::leaf(leaves[i], qnls_core::momentum::QUINTIC_SIGNS[i].times(sign)));
    LabelledTree::quintic(sign, children).unwrap()
}

#[test]
fn zero_divisor_is_reported() {
    let c = AmplitudeConfig::new(2, [(-1, q(1, 2)), (0, q(1, 3)), (2, q(1, 5))].into_iter().map(|(j, r)| (j, cx(r, q(0, 1)))).collect(), None)
        .unwrap();
    let w = FrequencyVector::<Q>::free(6);
    // nu = e_{-1} + 2 e_2 - 2 e_0 at j = 3: 1 + 8 - 9 = 0.
    let t = single_node(Sign::Plus, [-1, 0, 2, 0, 2]);
    assert!(!t.is_kernel_line());
    assert!(matches!(tree_value(&t, &c, &w), Err(qnls_core::Error::DivisorTooSmall { j: 3, .. })));
    assert!(tree_value(&single_node(Sign::Plus, [-1, 0, 2, 2, 2]), &c, &w).is_ok());
}

/// `omega` with `x = 0.01` on lines of momentum `e_3 - e_1 + e_2` and large divisors between
/// the stacked cluster nodes.
fn cluster_omega() -> FrequencyVector<f64> {
    let table = [(-4, 16.1), (-3, 9.2), (-2, 4.0), (-1, 1.3), (0, 0.0), (1, 1.0), (2, 4.5), (3, 9.0), (4, 12.49)];
    FrequencyVector::explicit(table.into_iter().collect(), 4)
}

/// Node keeping the momentum of `child` after two nodes: leaves `(1, 2, -1, -2)` then `(2, 1, -2, -1)`.
fn cluster_pair(child: Arc<LabelledTree>) -> Arc<LabelledTree> {
    let node = |c: Arc<LabelledTree>, a: [i64; 4]| {
        LabelledTree::quintic(
            Sign::Plus,
            [
                c,
                LabelledTree::leaf(a[0], Sign::Minus),
                LabelledTree::leaf(a[1], Sign::Plus),
                LabelledTree::leaf(a[2], Sign::Minus),
                LabelledTree::leaf(a[3], Sign::Plus),
            ],
        )
        .unwrap()
    };
    node(node(child, [2, 1, -2, -1]), [1, 2, -1, -2])
}

fn two_scales() -> PartitionOfUnity {
    PartitionOfUnity::new(ScaleSequence::from_values(vec![0, 7], vec![1.0, 0.01]).unwrap())
}

#[test]
fn single_cluster_fixture() {
    let bottom = single_node(Sign::Plus, [3, 1, 2, 0, 0]);
    let tree = cluster_pair(bottom.clone());
    assert_eq!(tree.momentum, bottom.momentum);
    let settings = ClusterSettings::dyadic(0.5, 8);
    let report = detect_clusters(&tree, &cluster_omega(), &two_scales(), &settings).unwrap();
    assert_eq!(report.clusters.len(), 1, "{report:?}");
    let cluster = &report.clusters[0];
    assert_eq!((cluster.exiting, cluster.scale, cluster.external_scale), (0, 0, 1));
    assert_eq!(report.lines[cluster.entering].momentum, bottom.momentum.to_text());
    assert_eq!(cluster.path.len(), 1);
    assert!(report.chains.is_empty());

    let flat = PartitionOfUnity::new(ScaleSequence::from_values(vec![0], vec![1e-4]).unwrap());
    assert!(detect_clusters(&tree, &cluster_omega(), &flat, &settings).unwrap().clusters.is_empty());

    // The size condition fails when the radii are too small.
    let tight = ClusterSettings::dyadic(0.5, 8);
    let short = ClusterSettings { radii: tight.radii.iter().map(|r| r / 16.0).collect(), ..tight };
    assert!(detect_clusters(&tree, &cluster_omega(), &two_scales(), &short).unwrap().clusters.is_empty());
}

#[test]
fn chain_of_two_clusters() {
    let bottom = single_node(Sign::Plus, [3, 1, 2, 0, 0]);
    let tree = cluster_pair(cluster_pair(bottom));
    let report = detect_clusters(&tree, &cluster_omega(), &two_scales(), &ClusterSettings::dyadic(0.5, 8)).unwrap();
    assert_eq!(report.clusters.len(), 2, "{report:?}");
    assert_eq!(report.resonant_lines.len(), 1);
    assert_eq!(report.chains.len(), 1);
    let chain = &report.chains[0];
    assert_eq!(chain.clusters.len(), 2);
    assert_eq!(chain.links, report.resonant_lines);
    let link = chain.links[0];
    assert_eq!(report.clusters[chain.clusters[0]].entering, link);
    assert_eq!(report.clusters[chain.clusters[1]].exiting, link);
}

#[test]
fn cluster_constant_value() {
    let c = qnls_core::trees::cluster_constant(0.5);
    assert!((c - (2.0 - 2f64.sqrt()) / (2.0 * 3f64.powf(0.25) + 1.0)).abs() < 1e-15);
}

#[test]
fn fallen_leaf_marks() {
    let c = AmplitudeConfig::new(2, [(0, q(1, 2)), (1, q(-1, 3)), (2, q(1, 5))].into_iter().map(|(j, r)| (j, cx(r, q(1, 7)))).collect(), None)
        .unwrap();
    let w = oracle_setup(4).1;
    let ctx = TreeContext { amplitudes: &c, omega: &w, counterterms: None };
    let t = single_node(Sign::Plus, [1, 0, 1, 0, 2]);
    let marks = mark_fallen_leaf(&t, 1, Sign::Plus);
    assert_eq!(marks.len(), 2);
    assert!(mark_fallen_leaf(&t, 2, Sign::Minus).is_empty());
    let zero = Q::zero();
    let total = marks.iter().fold(Coeff::<Q>::zero(), |mut a: Cx<Q>, m| {
        a.add_assign_ref(&m.value(&ctx, &zero).unwrap());
        a
    });
    // Derivative of c_1^2 * rest with respect to c_1.
    let value = tree_value(&t, &c, &w).unwrap();
    assert_eq!(total, value * cx(q(2, 1), zero.clone()) / c.get(1).unwrap().clone());
    assert!(marks[0].to_dot().contains("fillcolor=red"));
    let record = serde_json::to_string(&t.to_record()).unwrap();
    assert!(record.contains("\"quintic\""));
}

#[test]
fn shifted_path_derivative_matches_difference_quotient() {
    let (c, w) = oracle_setup(6);
    let mut trees = TreeEnumerator::new(&SUPPORT, Family::Expanded);
    let t = trees.kernel(2, 0, Sign::Plus).unwrap().into_iter().find(|t| matches!(t.body, qnls_core::trees::Body::Quintic(_))).unwrap();
    let ctx = TreeContext { amplitudes: &c, omega: &w, counterterms: None };
    let mark = t.leaves().into_iter().find(|(p, _)| p.len() == 2).map(|(p, _)| qnls_core::treesupport::FallenLeafMark { tree: t.clone(), leaf: p }).unwrap();
    assert_eq!(mark.path_lines().len(), 1);
    let x = q(1, 1000);
    let h = q(1, 1_000_000);
    let exact = mark.shift_derivative(&ctx, &x).unwrap();
    let quotient = (mark.value(&ctx, &(x.clone() + h.clone())).unwrap() - mark.value(&ctx, &(x - h.clone())).unwrap())
        / cx(q(2, 1) * h, Q::zero());
    let diff = qnls_core::scalar::modulus_f64(&(exact.clone() - quotient));
    assert!(diff <= 1e-6 * qnls_core::scalar::modulus_f64(&exact).max(1e-30), "{diff}");
}
