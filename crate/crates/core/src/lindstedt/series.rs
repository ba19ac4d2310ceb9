//! Sparse Fourier series and their chunked, order-preserving convolution.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hash};

use crate::exec::{chunk_count, chunk_ranges, Exec};
use crate::scalar::{Coeff, Real};

/// Hasher with a fixed key, so that iteration order depends only on insertion order.
pub type DetState = BuildHasherDefault<DefaultHasher>;
pub type KeyMap<K, C> = HashMap<K, C, DetState>;

/// Key of a sparse series: a lattice point that can be added and reflected.
pub trait SeriesKey: Clone + Eq + Hash + Ord + Send + Sync {
    fn plus(&self, other: &Self) -> Self;
    fn reflect(&self) -> Self;
}

impl SeriesKey for crate::momentum::SparseMomentum {
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn reflect(&self) -> Self {
        self.neg()
    }
}

impl SeriesKey for (i64, crate::momentum::SparseMomentum) {
    fn plus(&self, other: &Self) -> Self {
        (self.0 + other.0, self.1.add(&other.1))
    }
    fn reflect(&self) -> Self {
        (-self.0, self.1.neg())
    }
}

/// Sparse series `key -> coefficient`.
#[derive(Clone, Debug)]
pub struct Series<K, C> {
    pub map: KeyMap<K, C>,
}

impl<K: SeriesKey, C: Clone> Default for Series<K, C> {
    fn default() -> Self {
        Self { map: KeyMap::default() }
    }
}

impl<K: SeriesKey, C: Clone> Series<K, C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, key: &K) -> Option<&C> {
        self.map.get(key)
    }

    /// Entries in key order.
    pub fn sorted(&self) -> Vec<(&K, &C)> {
        let mut v: Vec<_> = self.map.iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }

    pub fn keys_sorted(&self) -> Vec<K> {
        let mut v: Vec<K> = self.map.keys().cloned().collect();
        v.sort_unstable();
        v
    }
}

impl<K: SeriesKey, C: Clone> FromIterator<(K, C)> for Series<K, C> {
    fn from_iter<I: IntoIterator<Item = (K, C)>>(iter: I) -> Self {
        Self { map: iter.into_iter().collect() }
    }
}

/// `key -> conj(value)` moved to the reflected key.
pub fn conj_reflect<R: Real, K: SeriesKey, C: Coeff<R>>(s: &Series<K, C>) -> Series<K, C> {
    s.sorted().into_iter().map(|(k, v)| (k.reflect(), v.conj())).collect()
}

/// Adds `a * b` into `acc`.
///
/// The left factor is split into chunks fixed by its length; partial sums are merged in chunk
/// order so every strategy produces the same floating-point result.
pub fn convolve_into<R: Real, K: SeriesKey, C: Coeff<R>>(
    acc: &mut Series<K, C>,
    a: &Series<K, C>,
    b: &Series<K, C>,
    exec: Exec,
) {
    if a.is_empty() || b.is_empty() {
        return;
    }
    let left = a.sorted();
    let right = b.sorted();
    let chunks = chunk_ranges(left.len(), chunk_count(left.len() * right.len() / 64));
    let partials = exec.map(&chunks, |range| {
        let mut local: KeyMap<K, C> = KeyMap::default();
        for (ka, va) in &left[range.clone()] {
            for (kb, vb) in &right {
                local.entry(ka.plus(kb)).or_insert_with(C::zero).add_assign_ref(&va.mul_ref(vb));
            }
        }
        let mut out: Vec<(K, C)> = local.into_iter().collect();
        out.sort_unstable_by(|x, y| x.0.cmp(&y.0));
        out
    });
    for part in partials {
        for (k, v) in part {
            acc.map.entry(k).or_insert_with(C::zero).add_assign_ref(&v);
        }
    }
}

/// `a * b` as a new series.
pub fn convolve<R: Real, K: SeriesKey, C: Coeff<R>>(a: &Series<K, C>, b: &Series<K, C>, exec: Exec) -> Series<K, C> {
    let mut acc = Series::new();
    convolve_into(&mut acc, a, b, exec);
    acc
}
