//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the maps below run on the current rayon pool;
//! without it they are plain iterator maps. Reductions are always performed
//! in input order over fixed-size chunks, so results do not depend on the
//! number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of items folded sequentially before partial results are combined.
pub const REDUCE_CHUNK: usize = 8;

/// Order-preserving map over a slice.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
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

/// Fallible order-preserving map; returns the first error in input order.
pub fn try_map<T, R, E, F>(items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map(items, f).into_iter().collect()
}

/// Maps every item and folds the results with `combine`.
///
/// Items are grouped into chunks of [`REDUCE_CHUNK`]; each chunk is folded
/// left to right, then chunk results are folded left to right. The grouping
/// is fixed, so the floating-point result is identical for any thread count
/// and with or without the `parallel` feature.
pub fn map_reduce<T, R, F, C>(items: &[T], f: F, combine: C) -> Option<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
    C: Fn(R, R) -> R + Sync + Send,
{
    let fold_chunk = |chunk: &[T]| -> Option<R> {
        chunk.iter().map(&f).reduce(&combine)
    };
    #[cfg(feature = "parallel")]
    let partial: Vec<Option<R>> = items.par_chunks(REDUCE_CHUNK).map(fold_chunk).collect();
    #[cfg(not(feature = "parallel"))]
    let partial: Vec<Option<R>> = items.chunks(REDUCE_CHUNK).map(fold_chunk).collect();
    partial.into_iter().flatten().reduce(&combine)
}

/// Runs `f` on a pool with the given number of threads (0 = rayon default).
/// Without the `parallel` feature `f` simply runs on the calling thread.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(f),
            Err(err) => {
                log::warn!("could not build a {threads}-thread pool ({err}); using the global pool");
                f()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let xs: Vec<u32> = (0..100).collect();
        assert_eq!(map(&xs, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn reduction_is_thread_count_independent() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64).powf(1.3)).collect();
        let one = with_threads(1, || map_reduce(&xs, |x| *x, |a, b| a + b)).unwrap();
        let four = with_threads(4, || map_reduce(&xs, |x| *x, |a, b| a + b)).unwrap();
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn empty_reduce_is_none() {
        let xs: Vec<f64> = vec![];
        assert!(map_reduce(&xs, |x| *x, |a, b| a + b).is_none());
    }
}
