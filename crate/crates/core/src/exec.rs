//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature disabled every strategy runs sequentially. Results are always
//! returned in input order so that merges are deterministic.

use serde::{Deserialize, Serialize};

/// Execution strategy for data-parallel loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when work is actually distributed over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Ordered map over a slice.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Ordered map over `0..n`.
    pub fn map_range<U, F>(self, n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

/// Splits `0..n` into at most `parts` contiguous ranges of near-equal size.
pub fn chunk_ranges(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.max(1).min(n.max(1));
    let base = n / parts;
    let extra = n % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Number of chunks used when splitting a loop of length `n`.
///
/// Independent of the strategy, so that floating-point reductions merged in chunk order give
/// identical results sequentially and in parallel.
pub fn chunk_count(n: usize) -> usize {
    (n / 64).clamp(1, 64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let v: Vec<usize> = (0..1000).collect();
        let seq = Exec::Sequential.map(&v, |x| x * 2);
        let par = Exec::Parallel.map(&v, |x| x * 2);
        assert_eq!(seq, par);
        assert_eq!(Exec::Parallel.map_range(10, |i| i), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn chunks_cover_range() {
        for n in [0, 1, 7, 100] {
            for p in [1, 3, 8] {
                let r = chunk_ranges(n, p);
                assert_eq!(r.iter().map(|x| x.len()).sum::<usize>(), n);
                assert_eq!(r.first().map(|x| x.start), Some(0));
            }
        }
    }
}
