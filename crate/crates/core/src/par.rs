//! Data-parallel helpers. With the `parallel` feature these run on rayon;
//! without it they fall back to plain sequential loops with identical output.
//!
//! Every helper is index-based and returns results in index order, so output
//! never depends on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Number of indices in `0..n` for which `pred` holds. Integer reduction, so
/// the result is schedule-independent.
pub fn count<F>(n: usize, pred: F) -> u64
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().filter(|&i| pred(i)).count() as u64
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).filter(|&i| pred(i)).count() as u64
    }
}

/// The result for the smallest index in `0..n` where `f` returns `Some`.
pub fn find_first<T, F>(n: usize, f: F) -> Option<T>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().find_map_first(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).find_map(f)
    }
}

/// Runs `f` on a pool with `threads` workers (`0` means the default pool).
/// A no-op wrapper in sequential builds.
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// True when compiled with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers_are_order_preserving() {
        let v = with_threads(3, || map_indexed(100, |i| i * i));
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(count(100, |i| i % 3 == 0), 34);
        assert_eq!(find_first(1000, |i| (i > 10 && i % 7 == 0).then_some(i)), Some(14));
        assert_eq!(find_first(10, |_| None::<usize>), None);
    }
}
