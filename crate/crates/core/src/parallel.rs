//! Chunked parallel reduction with results independent of the worker count.

use std::ops::Range;

use rayon::prelude::*;

/// Environment variable selecting the number of worker threads.
pub const WORKERS_ENV: &str = "SURFACE17_WORKERS";

/// Samples per chunk. Fixed so the partition never depends on threads.
const CHUNK: u64 = 1 << 13;

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// Map `work` over fixed-size chunks of `0..n` and combine with `merge`.
/// `merge` must be associative and commutative for the result to be
/// scheduling independent.
pub fn map_chunks<T, W, M>(n: u64, workers: Option<usize>, work: W, merge: M) -> T
where
    T: Send + Default,
    W: Fn(Range<u64>) -> T + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let run = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| work(c * CHUNK..((c + 1) * CHUNK).min(n)))
            .reduce(T::default, &merge)
    };
    match workers.or_else(workers_from_env) {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}
