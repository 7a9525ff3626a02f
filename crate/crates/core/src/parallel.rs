//! Shared worker pool for per-mesh-point evaluation.

use std::sync::OnceLock;

use rayon::ThreadPool;

/// Environment variable capping the worker count (0 or unset = one per core).
pub const THREADS_ENV: &str = "RESFORGE_THREADS";

/// The process-wide pool, sized from `RESFORGE_THREADS` on first use.
pub fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("resforge-{i}"))
            .build()
            .expect("thread pool")
    })
}

/// Maps `f` over `0..count` on the pool and returns results in index order.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    pool().install(|| (0..count).into_par_iter().map(f).collect())
}

/// Like [`map_indexed`], but runs on the calling thread when `parallel` is false.
pub fn map_indexed_if<T, F>(parallel: bool, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        map_indexed(count, f)
    } else {
        (0..count).map(f).collect()
    }
}
