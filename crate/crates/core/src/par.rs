//! Data-parallel helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! the same closures in a plain loop. Output order is always the index order,
//! so callers get identical results either way.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluate `f` for every index in `range`, collecting results in index order.
pub fn map_range<T, F>(range: Range<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        range.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.map(f).collect()
    }
}

/// Map over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Run `f` over fixed-size index chunks and concatenate the produced vectors
/// in chunk order. Chunk boundaries depend only on `len` and `chunk`.
pub fn flat_map_chunks<T, F>(len: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> Vec<T> + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = len.div_ceil(chunk);
    let parts = map_range(0..n_chunks, |c| {
        let start = c * chunk;
        f(c, start..(start + chunk).min(len))
    });
    let mut out = Vec::with_capacity(parts.iter().map(Vec::len).sum());
    for p in parts {
        out.extend(p);
    }
    out
}

/// Whether this build dispatches to a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range_in_order() {
        let v = flat_map_chunks(10, 3, |_, r| r.collect());
        assert_eq!(v, (0..10).collect::<Vec<_>>());
        assert!(flat_map_chunks(0, 3, |_, r| r.collect::<Vec<_>>()).is_empty());
    }

    #[test]
    fn map_range_keeps_order() {
        assert_eq!(map_range(0..5, |i| i * i), vec![0, 1, 4, 9, 16]);
    }
}
