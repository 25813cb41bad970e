//! Replicate-level parallelism. With the `parallel` feature replicate loops
//! run on the rayon pool; without it they run in order. Output order and
//! values are identical either way since each replicate owns its RNG stream.

/// Pairwise sum with a fixed reduction tree, so results do not depend on
/// how work was scheduled.
pub fn tree_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    tree_sum(&values[..mid]) + tree_sum(&values[mid..])
}

/// `(0..n).map(f)` collected in index order.
#[cfg(feature = "parallel")]
pub fn replicate_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn replicate_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Fallible variant of [`replicate_map`]; returns the error of the lowest
/// failing index.
pub fn try_replicate_map<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    replicate_map(n, f).into_iter().collect()
}

/// Sequential map regardless of features; used by the benchmark baseline.
pub fn replicate_map_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Whether replicate loops run in parallel in this build.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
