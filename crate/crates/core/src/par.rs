//! Thread-count independent parallel reductions.

use rayon::prelude::*;

/// Work items per reduction chunk. Fixed so that floating-point summation
/// order never depends on the size of the thread pool.
pub const CHUNK: usize = 128;

/// Sums contributions of items `0..count` into a vector of length `len`.
/// `f(item, acc)` adds item's contribution to `acc`.
pub fn chunked_sum<F>(count: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; len];
            for item in c * CHUNK..((c + 1) * CHUNK).min(count) {
                f(item, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; len];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

/// Maps `0..count` in parallel, returning results in index order.
pub fn map_ordered<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}
