//! Deterministic work splitting.
//!
//! Reductions over samples are computed as ordered per-chunk partials that
//! are folded sequentially, with a fixed chunk size. The parallel and
//! sequential paths therefore produce bit-identical results for any thread
//! count: only the order in which chunk partials are *computed* changes,
//! never the order in which they are *combined*.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed reduction chunk size. Changing this changes results at the
/// floating-point bit level, so it is part of the determinism contract.
pub const CHUNK: usize = 32;

/// Maps each `CHUNK`-sized slice of `items` to a partial, in slice order.
pub fn map_chunks<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    {
        items.par_chunks(CHUNK).map(&f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_chunks_seq(items, f)
    }
}

/// Sequential twin of [`map_chunks`]; used for benchmarks.
pub fn map_chunks_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&[T]) -> R,
{
    items.chunks(CHUNK).map(f).collect()
}

/// Maps every item independently, preserving order.
pub fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(&f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(&f).collect()
    }
}

/// Sequential twin of [`ordered_map`]; used for benchmarks.
pub fn ordered_map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_seq_bitwise() {
        let data: Vec<f64> = (0..1000).map(|i| (i as f64).sin() * 1e3).collect();
        let sum = |partials: Vec<f64>| partials.into_iter().fold(0.0f64, |a, b| a + b);
        let par = sum(map_chunks(&data, |c| c.iter().sum::<f64>()));
        let seq = sum(map_chunks_seq(&data, |c| c.iter().sum::<f64>()));
        assert_eq!(par.to_bits(), seq.to_bits());
    }

    #[test]
    fn ordered_map_preserves_order() {
        let data: Vec<u64> = (0..100).collect();
        let par = ordered_map(&data, |x| x * 2);
        let seq = ordered_map_seq(&data, |x| x * 2);
        assert_eq!(par, seq);
    }

    #[test]
    fn empty_input() {
        let data: Vec<f64> = Vec::new();
        assert!(map_chunks(&data, |c| c.len()).is_empty());
        assert!(ordered_map(&data, |_| 0).is_empty());
    }
}
