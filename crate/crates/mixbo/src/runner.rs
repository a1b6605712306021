//! Parallel drivers for benchmarks and synthetic campaigns.
//!
//! Repeats are independent and individually seeded, so results do not depend
//! on the number of worker threads.

use std::time::Instant;

use mixbo_core::bench::{run_bench_repeat, BenchConfig};
use mixbo_core::campaign::{run_synthetic_repeat, Pool, SyntheticConfig, TrajectoryStats};
use rayon::prelude::*;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Timed<T> {
    pub value: T,
    pub seconds: f64,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<Timed<T>> {
    let start = Instant::now();
    let value = f()?;
    Ok(Timed {
        value,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Best-so-far trajectories of `repeats` benchmark runs.
pub fn bench(config: &BenchConfig, repeats: usize) -> Result<Timed<TrajectoryStats>> {
    timed(|| {
        let runs = (0..repeats)
            .into_par_iter()
            .map(|r| run_bench_repeat(config, r))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(TrajectoryStats::from_runs(runs)?)
    })
}

/// Hypervolume trajectories of every synthetic repeat.
pub fn synthetic(config: &SyntheticConfig, pool: &Pool) -> Result<Timed<TrajectoryStats>> {
    timed(|| {
        let runs = (0..config.repeats)
            .into_par_iter()
            .map(|r| run_synthetic_repeat(config, pool, r).map(|c| c.hypervolume_series()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(TrajectoryStats::from_runs(runs)?)
    })
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}
