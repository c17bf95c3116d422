//! Parallel execution of independent trajectories.

use rayon::prelude::*;

use super::trajectory::{TrajectoryConfig, TrajectoryOutput, Unraveling};
use crate::error::{Error, Result};

/// Thread pool with `workers` threads (0: all available cores).
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Maps `f` over `indices` on `workers` threads, returning results in index order.
pub fn par_map<T, F>(indices: std::ops::Range<u64>, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = worker_pool(workers)?;
    Ok(pool.install(|| indices.into_par_iter().map(&f).collect()))
}

/// Trajectories `first..first + count` of the ensemble seeded by `master_seed`.
/// Each result depends only on its index, never on the worker count.
pub fn run_ensemble(
    unraveling: &Unraveling,
    cfg: &TrajectoryConfig,
    master_seed: u64,
    first: u64,
    count: u64,
    workers: usize,
) -> Result<Vec<Result<TrajectoryOutput>>> {
    par_map(first..first + count, workers, |i| unraveling.run_seeded(cfg, master_seed, i))
}

/// Pairwise (cascade) sum, insensitive to the summation order of partial blocks.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
