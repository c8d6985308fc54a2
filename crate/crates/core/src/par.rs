//! Execution policy for replicate loops.
//!
//! With the `parallel` feature (default) replicate loops can run on the
//! rayon pool; without it, or with [`Execution::Serial`], they run on the
//! calling thread. Results are always collected in index order, so output
//! does not depend on the policy or the thread count.

/// How replicate loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Run on the calling thread.
    Serial,
    /// Run on the current rayon pool (serial when built without `parallel`).
    #[default]
    Parallel,
}

/// `(0..n).map(f)` under the given policy, in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Runs `f` with a pool of `threads` workers; `None` uses the global pool.
///
/// Thread count never changes results, only wall time.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
