//! Data-parallel execution with a sequential fallback.
//!
//! Without the `parallel` feature every entry point runs on the calling
//! thread; results are identical either way because reductions are
//! index-ordered.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Map every item and collect results in input order.
pub fn map_collect<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Fold contiguous chunks of `range` independently, then combine the chunk
/// results in chunk order.
pub fn fold_chunks<A, F, C>(exec: Execution, range: Range<u64>, chunk: u64, fold: F, combine: C) -> Option<A>
where
    A: Send,
    F: Fn(u64, Range<u64>) -> A + Sync + Send,
    C: Fn(A, A) -> A,
{
    let chunk = chunk.max(1);
    let len = range.end.saturating_sub(range.start);
    let n_chunks = len.div_ceil(chunk);
    let run = |c: u64| {
        let lo = range.start + c * chunk;
        let hi = (lo + chunk).min(range.end);
        fold(c, lo..hi)
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        let parts: Vec<A> = (0..n_chunks).into_par_iter().map(run).collect();
        return parts.into_iter().reduce(combine);
    }
    let _ = exec;
    (0..n_chunks).map(run).reduce(combine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_between_modes() {
        let sum = |exec| fold_chunks(exec, 0..10_007, 97, |_, r| r.sum::<u64>(), |a, b| a + b).unwrap();
        assert_eq!(sum(Execution::Sequential), 10_006 * 10_007 / 2);
        assert_eq!(sum(Execution::Parallel), sum(Execution::Sequential));
    }

    #[test]
    fn empty_range_folds_to_none() {
        assert!(fold_chunks(Execution::Parallel, 5..5, 4, |_, _| 1u32, |a, b| a + b).is_none());
    }

    #[test]
    fn collect_preserves_order() {
        let v: Vec<u32> = (0..1000).collect();
        let out = map_collect(Execution::Parallel, &v, |x| x * 2);
        assert!(out.iter().enumerate().all(|(i, &x)| x == 2 * i as u32));
    }
}
