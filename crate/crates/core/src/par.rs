//! Chunked map over independent work items.
//!
//! Monte Carlo budgets are cut into fixed-size chunks, each with its own
//! random stream, and per-chunk results come back in chunk order. The output
//! is therefore identical for every worker count, and identical between the
//! `parallel` (rayon) build and the sequential fallback.

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "FADECAP_THREADS";

/// Applies `f` to every index in `0..count`, returning results in index order.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_indexed_parallel(count, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_sequential(count, f)
    }
}

pub fn map_indexed_sequential<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed_parallel<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

/// Splits `total` items into chunks of at most `chunk` and maps
/// `f(chunk_index, chunk_len)` over them.
pub fn map_chunks<T, F>(total: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, usize) -> T + Sync + Send,
{
    let count = total.div_ceil(chunk);
    map_indexed(count, |i| {
        let len = chunk.min(total - i * chunk);
        f(i as u64, len)
    })
}

/// Number of workers the current build will use.
pub fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Sizes the global pool from [`THREADS_ENV`] if set. Returns the worker count.
pub fn init_from_env() -> usize {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if the pool was already built, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    worker_count()
}
