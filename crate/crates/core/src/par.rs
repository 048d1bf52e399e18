//! Job-level parallelism.
//!
//! Independent jobs (folds, repetitions, perturbations) are mapped through
//! [`par_map`]. With the `parallel` feature the map runs on a rayon pool of
//! the requested size; without it, or with one worker, it is a plain
//! sequential map. Results are always returned in input order, so callers see
//! identical output regardless of the worker count.

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "GRAPHTAX_WORKERS";

/// Worker count from `GRAPHTAX_WORKERS`, else `configured`, else the number
/// of available cores.
pub fn resolve_workers(configured: Option<usize>) -> usize {
    if let Some(n) = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        return n.max(1);
    }
    configured.unwrap_or_else(available).max(1)
}

pub fn available() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    // Nested call from inside a pool: share the enclosing pool.
    if rayon::current_thread_index().is_some() {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], _workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_worker_count() {
        let items: Vec<u64> = (0..100).collect();
        let seq = par_map(&items, 1, |x| x * x);
        let par = par_map(&items, 4, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }
}
