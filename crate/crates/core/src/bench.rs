//! Single-objective optimization benchmarks on grid pools.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::acquisition::{self, AcquisitionConfig, CandidatePool, Method};
use crate::gp::{FitOptions, GaussianProcess, Noise};
use crate::oracles::{eval_1d, eval_rastrigin};
use crate::rng::{derive_seed, Role};
use crate::space::{Bounds, FormulationId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchKind {
    /// `sin(5x)(1 - tanh(x^2))`, maximized on [-2, 2].
    OneD,
    /// Rastrigin, minimized on [-2.5, 2.5]^2.
    Rastrigin,
}

impl BenchKind {
    fn half_width(self) -> f64 {
        match self {
            BenchKind::OneD => 2.0,
            BenchKind::Rastrigin => 2.5,
        }
    }

    fn dim(self) -> usize {
        match self {
            BenchKind::OneD => 1,
            BenchKind::Rastrigin => 2,
        }
    }

    /// Value maximized by the optimizer.
    fn target(self, x: &[f64]) -> Result<f64> {
        match self {
            BenchKind::OneD => eval_1d(x[0]),
            BenchKind::Rastrigin => eval_rastrigin(x).map(|v| -v),
        }
    }

    /// Converts a maximized target back to the function's natural value.
    fn natural(self, target: f64) -> f64 {
        match self {
            BenchKind::OneD => target,
            BenchKind::Rastrigin => -target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub kind: BenchKind,
    pub method: Method,
    pub iterations: usize,
    pub batch_size: usize,
    /// Points per axis of the grid pool.
    pub grid: usize,
    pub initial: usize,
    /// Box the initial points are drawn from; the whole domain when absent.
    pub initial_box: Option<Bounds>,
    pub mc_samples: usize,
    pub beta: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self::one_d()
    }
}

impl BenchConfig {
    /// EI with q = 1 on a 401-point grid, 5 initial points in [-2, -1].
    pub fn one_d() -> Self {
        Self {
            kind: BenchKind::OneD,
            method: Method::Ei,
            iterations: 8,
            batch_size: 1,
            grid: 401,
            initial: 5,
            initial_box: Some(Bounds {
                min: -2.0,
                max: -1.0,
            }),
            mc_samples: 512,
            beta: 2.0,
            seed: 0,
            restarts: 4,
            max_iters: 200,
        }
    }

    /// Batch EI with q = 10 on a 101 x 101 grid, 10 random initial points.
    pub fn rastrigin() -> Self {
        Self {
            kind: BenchKind::Rastrigin,
            method: Method::Ei,
            iterations: 8,
            batch_size: 10,
            grid: 101,
            initial: 10,
            initial_box: None,
            mc_samples: 256,
            beta: 2.0,
            seed: 0,
            restarts: 4,
            max_iters: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.method, Method::Ei | Method::Ucb | Method::Random) {
            return Err(Error::InvalidConfig(format!(
                "benchmark {:?} accepts ei, ucb or random, not {}",
                self.kind, self.method
            )));
        }
        if self.grid < 2 || self.initial < 2 {
            return Err(Error::InvalidConfig(
                "grid and initial must be at least 2".into(),
            ));
        }
        Ok(())
    }

    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        let h = self.kind.half_width();
        let axis: Vec<f64> = (0..self.grid)
            .map(|i| -h + 2.0 * h * i as f64 / (self.grid - 1) as f64)
            .collect();
        match self.kind.dim() {
            1 => axis.iter().map(|&x| alloc::vec![x]).collect(),
            _ => axis
                .iter()
                .flat_map(|&x| axis.iter().map(move |&y| alloc::vec![x, y]))
                .collect(),
        }
    }
}

/// Best value found after each iteration (index 0 is the initial design), in
/// the function's natural orientation.
pub fn run_bench_repeat(config: &BenchConfig, repeat: usize) -> Result<Vec<f64>> {
    config.validate()?;
    let seed = derive_seed(config.seed, &[Role::Repeat as u64, repeat as u64]);
    let grid = config.grid_points();
    let ids: Vec<FormulationId> = (0..grid.len() as u64).map(FormulationId).collect();

    let eligible: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            config
                .initial_box
                .map_or(true, |b| grid[i].iter().all(|&v| v >= b.min && v <= b.max))
        })
        .collect();
    let picks = acquisition::random_select(
        eligible.len(),
        config.initial,
        derive_seed(seed, &[Role::InitialDesign as u64]),
    )?;
    let mut observed: Vec<usize> = picks.into_iter().map(|i| eligible[i]).collect();
    let mut targets: Vec<f64> = observed
        .iter()
        .map(|&i| config.kind.target(&grid[i]))
        .collect::<Result<_>>()?;

    let best = |t: &[f64]| {
        config
            .kind
            .natural(t.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    let mut trajectory = alloc::vec![best(&targets)];
    let h = config.kind.half_width();
    let mut warm = None;
    for it in 0..config.iterations {
        let it_seed = derive_seed(seed, &[it as u64]);
        let mut taken = alloc::vec![false; grid.len()];
        observed.iter().for_each(|&i| taken[i] = true);
        let free: Vec<usize> = (0..grid.len()).filter(|&i| !taken[i]).collect();
        let free_ids: Vec<FormulationId> = free.iter().map(|&i| ids[i]).collect();
        let free_x: Vec<Vec<f64>> = free.iter().map(|&i| grid[i].clone()).collect();
        let acq = AcquisitionConfig {
            method: config.method,
            batch_size: config.batch_size,
            mc_samples: config.mc_samples,
            seed: it_seed,
            beta: config.beta,
            ..AcquisitionConfig::default()
        };
        let chosen: Vec<usize> = if config.method == Method::Random {
            acquisition::random_select(free.len(), config.batch_size, it_seed)?
        } else {
            let inputs: Vec<Vec<f64>> = observed.iter().map(|&i| grid[i].clone()).collect();
            let options = FitOptions {
                restarts: config.restarts,
                max_iters: config.max_iters,
                seed: derive_seed(it_seed, &[Role::FitRestarts as u64]),
                input_bounds: Some(alloc::vec![Bounds::new(-h, h)?; config.kind.dim()]),
                warm_start: warm.take(),
                ..FitOptions::default()
            };
            let model = GaussianProcess::fit(
                &inputs,
                &targets,
                Noise::noiseless(inputs.len(), 1e-8),
                &options,
            )?;
            warm = Some(model.hyperparameters().clone());
            let pool = CandidatePool::new(&free_ids, &free_x)?;
            let picks = match config.method {
                Method::Ei => {
                    let incumbent = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    acquisition::ei_select(&model, &pool, incumbent, &acq)?
                }
                _ => acquisition::ucb_select(&model, &pool, &acq)?,
            };
            picks.into_iter().map(|p| p.index).collect()
        };
        for c in chosen {
            let i = free[c];
            observed.push(i);
            targets.push(config.kind.target(&grid[i])?);
        }
        trajectory.push(best(&targets));
    }
    Ok(trajectory)
}
