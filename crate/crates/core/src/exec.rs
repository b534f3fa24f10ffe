//! Data-parallel helpers with a sequential fallback.
//!
//! Results are always produced in index order, so output never depends on
//! the schedule or the number of threads.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Use the rayon pool when the `parallel` feature is enabled.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f)` collected in order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Apply `f` to every element with its index.
pub fn for_each_mut<T, F>(exec: Execution, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() >= 256 {
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    let _ = exec;
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Run `f` inside a pool of `workers` threads (or directly when sequential).
pub fn with_workers<R, F>(exec: Execution, workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = (exec, workers);
    f()
}

/// Default worker count: the available parallelism.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
