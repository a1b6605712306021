//! Gaussian process regression with a Matérn-5/2 ARD kernel.
//!
//! Inputs are scaled to [0, 1] per dimension and targets are standardized
//! before fitting; all hyperparameters live in that scaled space. Predictions
//! are reported in the caller's units.

mod optim;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::Cholesky;
use crate::rng::{keyed_rng, Role};
use crate::space::Bounds;
use crate::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

const LOG_LENGTHSCALE: (f64, f64) = (-4.605_170_185_988_091, 4.605_170_185_988_091); // ln 0.01, ln 100
const LOG_SIGNAL_VAR: (f64, f64) = (-9.210_340_371_976_182, 3.912_023_005_428_146); // ln 1e-4, ln 50
const MEAN_RANGE: (f64, f64) = (-5.0, 5.0);
const LOG_NOISE_MAX: f64 = core::f64::consts::LN_2;

/// How observation noise enters the kernel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// One noise variance shared by all points, learned with the kernel.
    InferredHomoscedastic,
    /// Known per-point noise variances (e.g. replicate variance / count).
    FixedPerPoint,
}

/// Noise specification passed to [`GaussianProcess::fit`].
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    Inferred,
    /// Per-point variances in target units.
    Fixed(Vec<f64>),
}

impl Noise {
    /// Noise pinned at `floor` for every point, for deterministic targets.
    pub fn noiseless(n: usize, floor: f64) -> Self {
        Noise::Fixed(vec![floor; n])
    }

    pub fn mode(&self) -> NoiseMode {
        match self {
            Noise::Inferred => NoiseMode::InferredHomoscedastic,
            Noise::Fixed(_) => NoiseMode::FixedPerPoint,
        }
    }
}

/// Kernel hyperparameters in scaled-input / standardized-target space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscales: Vec<f64>,
    /// Prior standard deviation of the latent function.
    pub output_scale: f64,
    pub mean: f64,
    /// Learned noise variance; `None` in fixed-noise mode.
    pub noise_variance: Option<f64>,
}

impl Hyperparameters {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.lengthscales.len(),
            });
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !self.lengthscales.iter().all(|&l| positive(l))
            || !positive(self.output_scale)
            || !self.mean.is_finite()
            || self.noise_variance.is_some_and(|n| !positive(n))
        {
            return Err(Error::InvalidConfig(format!(
                "hyperparameters must be finite and positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Options for hyperparameter fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Number of optimizer starts (the first is the default or warm start).
    pub restarts: usize,
    pub max_iters: usize,
    /// Lower bound on the inferred noise variance (standardized units).
    pub noise_floor: f64,
    pub seed: u64,
    /// Input box used for scaling; data min/max when absent.
    pub input_bounds: Option<Vec<Bounds>>,
    /// Hyperparameters used as the first start, e.g. from the previous fit.
    pub warm_start: Option<Hyperparameters>,
    /// Maximize the log posterior under Gamma hyperpriors instead of the
    /// plain log marginal likelihood.
    pub hyperpriors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 200,
            noise_floor: 1e-6,
            seed: 0,
            input_bounds: None,
            warm_start: None,
            hyperpriors: true,
        }
    }
}

/// Posterior mean and standard deviation at one query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub sd: f64,
}

/// Fit objective (log marginal likelihood, plus log hyperprior when enabled)
/// at every optimizer start and at the result.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitReport {
    pub start_objective: Vec<f64>,
    pub best_objective: f64,
}

/// Everything needed to rebuild a fitted model from its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpCheckpoint {
    pub hyperparameters: Hyperparameters,
    pub noise_mode: NoiseMode,
    pub input_bounds: Vec<Bounds>,
    pub target_mean: f64,
    pub target_sd: f64,
    pub training_points: usize,
}

#[derive(Debug, Clone)]
struct Scaling {
    lo: Vec<f64>,
    span: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
}

impl Scaling {
    fn from_data(inputs: &[Vec<f64>], targets: &[f64], bounds: Option<&[Bounds]>) -> Self {
        let d = inputs[0].len();
        let (lo, span) = match bounds {
            Some(b) => (
                b.iter().map(|b| b.min).collect(),
                b.iter().map(|b| b.max - b.min).collect(),
            ),
            None => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for x in inputs {
                    for k in 0..d {
                        lo[k] = lo[k].min(x[k]);
                        hi[k] = hi[k].max(x[k]);
                    }
                }
                let span = lo
                    .iter()
                    .zip(&hi)
                    .map(|(l, h)| if h > l { h - l } else { 1.0 })
                    .collect();
                (lo, span)
            }
        };
        let n = targets.len() as f64;
        let y_mean = targets.iter().sum::<f64>() / n;
        let var = targets
            .iter()
            .map(|y| (y - y_mean) * (y - y_mean))
            .sum::<f64>()
            / n;
        let y_sd = if var > 1e-24 { libm::sqrt(var) } else { 1.0 };
        Self {
            lo,
            span,
            y_mean,
            y_sd,
        }
    }

    fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lo)
            .zip(&self.span)
            .map(|((v, l), s)| (v - l) / s)
            .collect()
    }

    fn bounds(&self) -> Vec<Bounds> {
        self.lo
            .iter()
            .zip(&self.span)
            .map(|(&l, &s)| Bounds { min: l, max: l + s })
            .collect()
    }
}

#[inline]
fn matern52(r: f64) -> f64 {
    (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * libm::exp(-SQRT5 * r)
}

#[inline]
fn scaled_sq_dist(a: &[f64], b: &[f64], inv_ls: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(inv_ls)
        .map(|((x, y), il)| {
            let t = (x - y) * il;
            t * t
        })
        .sum()
}

/// Training data in scaled space, shared by fitting and conditioning.
struct Training {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    fixed_noise: Option<Vec<f64>>,
    dim: usize,
}

/// Parameter vector layout: [ln l_1..l_d, ln signal_var, mean, (ln noise)].
struct Layout {
    dim: usize,
    inferred: bool,
}

impl Layout {
    fn len(&self) -> usize {
        self.dim + 2 + usize::from(self.inferred)
    }

    fn to_hyper(&self, theta: &[f64]) -> Hyperparameters {
        Hyperparameters {
            lengthscales: theta[..self.dim].iter().map(|&v| libm::exp(v)).collect(),
            output_scale: libm::exp(0.5 * theta[self.dim]),
            mean: theta[self.dim + 1],
            noise_variance: self.inferred.then(|| libm::exp(theta[self.dim + 2])),
        }
    }

    fn encode(&self, h: &Hyperparameters) -> Vec<f64> {
        let mut t: Vec<f64> = h.lengthscales.iter().map(|&l| libm::log(l)).collect();
        t.push(2.0 * libm::log(h.output_scale));
        t.push(h.mean);
        if self.inferred {
            t.push(libm::log(h.noise_variance.unwrap_or(1e-2)));
        }
        t
    }

    /// Log density (up to a constant) and gradient of the hyperpriors:
    /// lengthscale ~ Gamma(3, 6), signal variance ~ Gamma(2, 0.15), noise
    /// variance ~ Gamma(1.1, 0.05), all in scaled units; flat on the mean.
    fn log_prior(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; self.len()];
        let mut gamma = |i: usize, shape: f64, rate: f64| {
            let x = libm::exp(theta[i]);
            value += (shape - 1.0) * theta[i] - rate * x;
            grad[i] = (shape - 1.0) - rate * x;
        };
        for i in 0..self.dim {
            gamma(i, 3.0, 6.0);
        }
        gamma(self.dim, 2.0, 0.15);
        if self.inferred {
            gamma(self.dim + 2, 1.1, 0.05);
        }
        (value, grad)
    }

    fn bounds(&self, noise_floor: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![LOG_LENGTHSCALE.0; self.dim];
        let mut hi = vec![LOG_LENGTHSCALE.1; self.dim];
        lo.extend([LOG_SIGNAL_VAR.0, MEAN_RANGE.0]);
        hi.extend([LOG_SIGNAL_VAR.1, MEAN_RANGE.1]);
        if self.inferred {
            lo.push(libm::log(noise_floor.max(1e-300)));
            hi.push(LOG_NOISE_MAX.max(libm::log(noise_floor)));
        }
        (lo, hi)
    }
}

impl Training {
    fn noise(&self, h: &Hyperparameters, i: usize) -> f64 {
        match &self.fixed_noise {
            Some(v) => v[i],
            None => h.noise_variance.unwrap_or(0.0),
        }
    }

    fn kernel_matrix(&self, h: &Hyperparameters) -> Vec<f64> {
        let n = self.x.len();
        let s2 = h.output_scale * h.output_scale;
        let inv_ls: Vec<f64> = h.lengthscales.iter().map(|l| 1.0 / l).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = s2 + self.noise(h, i);
            for j in 0..i {
                let r = libm::sqrt(scaled_sq_dist(&self.x[i], &self.x[j], &inv_ls));
                let v = s2 * matern52(r);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }

    /// Log marginal likelihood and its gradient with respect to `theta`.
    fn lml_and_grad(&self, layout: &Layout, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let h = layout.to_hyper(theta);
        let n = self.x.len();
        let k = self.kernel_matrix(&h);
        let chol = Cholesky::factor(&k, n, 1e-10)?;
        let resid: Vec<f64> = self.y.iter().map(|y| y - h.mean).collect();
        let alpha = chol.solve(&resid);
        let fit: f64 = resid.iter().zip(&alpha).map(|(r, a)| r * a).sum();
        let lml = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;
        if !lml.is_finite() {
            return None;
        }

        // W = alpha alpha^T - K^-1; dL/dtheta = 0.5 tr(W dK/dtheta).
        let kinv = chol.inverse();
        let s2 = h.output_scale * h.output_scale;
        let inv_ls: Vec<f64> = h.lengthscales.iter().map(|l| 1.0 / l).collect();
        let d = self.dim;
        let mut grad = vec![0.0; layout.len()];
        for i in 0..n {
            for j in 0..i {
                let w = alpha[i] * alpha[j] - kinv[i * n + j];
                let r = libm::sqrt(scaled_sq_dist(&self.x[i], &self.x[j], &inv_ls));
                let e = libm::exp(-SQRT5 * r);
                // Off-diagonal terms appear twice in the trace.
                let base = 2.0 * w * s2;
                grad[d] += 0.5 * base * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * e;
                let radial = base * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e;
                for kdim in 0..d {
                    let t = (self.x[i][kdim] - self.x[j][kdim]) * inv_ls[kdim];
                    grad[kdim] += 0.5 * radial * t * t;
                }
            }
            let wii = alpha[i] * alpha[i] - kinv[i * n + i];
            grad[d] += 0.5 * wii * s2;
            if layout.inferred {
                grad[d + 2] += 0.5 * wii * h.noise_variance.unwrap_or(0.0);
            }
        }
        grad[d + 1] = alpha.iter().sum();
        Some((lml, grad))
    }
}

/// A fitted Gaussian process posterior over one scalar target.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    hyper: Hyperparameters,
    noise_mode: NoiseMode,
    scaling: Scaling,
    x: Vec<Vec<f64>>,
    inv_ls: Vec<f64>,
    chol: Cholesky,
    alpha: Vec<f64>,
    lml: f64,
    report: FitReport,
}

fn validate_data(inputs: &[Vec<f64>], targets: &[f64], noise: &Noise) -> Result<usize> {
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            found: targets.len(),
        });
    }
    if inputs.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "at least 2 training points are required, got {}",
            inputs.len()
        )));
    }
    let dim = inputs[0].len();
    if dim == 0 {
        return Err(Error::Empty("input vector"));
    }
    for x in inputs {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training inputs"));
        }
    }
    if !inputs.iter().any(|x| x != &inputs[0]) {
        return Err(Error::InvalidConfig(
            "at least 2 distinct training points are required".into(),
        ));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training targets"));
    }
    if let Noise::Fixed(v) = noise {
        if v.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: targets.len(),
                found: v.len(),
            });
        }
        if v.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidConfig(
                "fixed noise variances must be finite and positive".into(),
            ));
        }
    }
    Ok(dim)
}

impl GaussianProcess {
    /// Fits hyperparameters by multi-start maximization of the log marginal
    /// likelihood and conditions on the data.
    pub fn fit(
        inputs: &[Vec<f64>],
        targets: &[f64],
        noise: Noise,
        options: &FitOptions,
    ) -> Result<Self> {
        let dim = validate_data(inputs, targets, &noise)?;
        if let Some(b) = &options.input_bounds {
            if b.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: b.len(),
                });
            }
        }
        let scaling = Scaling::from_data(inputs, targets, options.input_bounds.as_deref());
        let training = Self::training(inputs, targets, &noise, &scaling, dim);
        let layout = Layout {
            dim,
            inferred: matches!(noise, Noise::Inferred),
        };
        let noise_floor = options.noise_floor.max(1e-12);
        let (lo, hi) = layout.bounds(noise_floor);

        let starts = Self::starts(&layout, options, noise_floor);
        let mut report = FitReport {
            start_objective: Vec::with_capacity(starts.len()),
            best_objective: f64::NEG_INFINITY,
        };
        let evaluate = |t: &[f64]| {
            let (mut v, mut g) = training.lml_and_grad(&layout, t)?;
            if options.hyperpriors {
                let (pv, pg) = layout.log_prior(t);
                v += pv;
                g.iter_mut().zip(pg).for_each(|(a, b)| *a += b);
            }
            Some((v, g))
        };
        let mut best: Option<Vec<f64>> = None;
        for mut theta in starts {
            for (t, (l, h)) in theta.iter_mut().zip(lo.iter().zip(&hi)) {
                *t = t.clamp(*l, *h);
            }
            let start = evaluate(&theta).map_or(f64::NEG_INFINITY, |(v, _)| v);
            report.start_objective.push(start);
            let objective =
                |t: &[f64]| evaluate(t).map(|(v, g)| (-v, g.into_iter().map(|x| -x).collect()));
            let Some(out) = optim::minimize(objective, &theta, &lo, &hi, options.max_iters) else {
                continue;
            };
            if -out.value > report.best_objective {
                report.best_objective = -out.value;
                best = Some(out.x);
            }
        }
        let theta = best.ok_or(Error::NotPositiveDefinite {
            size: inputs.len(),
            jitter: crate::linalg::JITTER_MAX,
        })?;
        let hyper = layout.to_hyper(&theta);
        Self::condition(training, scaling, hyper, noise.mode(), report)
    }

    /// Conditions on data with fixed hyperparameters (no optimization), e.g.
    /// when restoring from a [`GpCheckpoint`].
    pub fn with_hyperparameters(
        inputs: &[Vec<f64>],
        targets: &[f64],
        noise: Noise,
        hyperparameters: Hyperparameters,
        input_bounds: Option<&[Bounds]>,
    ) -> Result<Self> {
        let dim = validate_data(inputs, targets, &noise)?;
        hyperparameters.validate(dim)?;
        if matches!(noise, Noise::Inferred) != hyperparameters.noise_variance.is_some() {
            return Err(Error::InvalidConfig(
                "noise mode does not match the hyperparameters".into(),
            ));
        }
        let scaling = Scaling::from_data(inputs, targets, input_bounds);
        let training = Self::training(inputs, targets, &noise, &scaling, dim);
        Self::condition(
            training,
            scaling,
            hyperparameters,
            noise.mode(),
            FitReport::default(),
        )
    }

    fn training(
        inputs: &[Vec<f64>],
        targets: &[f64],
        noise: &Noise,
        scaling: &Scaling,
        dim: usize,
    ) -> Training {
        let var_scale = scaling.y_sd * scaling.y_sd;
        Training {
            x: inputs.iter().map(|x| scaling.scale(x)).collect(),
            y: targets
                .iter()
                .map(|y| (y - scaling.y_mean) / scaling.y_sd)
                .collect(),
            fixed_noise: match noise {
                Noise::Inferred => None,
                Noise::Fixed(v) => Some(v.iter().map(|s| s / var_scale).collect()),
            },
            dim,
        }
    }

    fn starts(layout: &Layout, options: &FitOptions, noise_floor: f64) -> Vec<Vec<f64>> {
        let count = options.restarts.max(1);
        let mut starts = Vec::with_capacity(count);
        let first = options
            .warm_start
            .clone()
            .filter(|h| h.validate(layout.dim).is_ok());
        starts.push(layout.encode(&first.unwrap_or_else(|| Hyperparameters {
            lengthscales: vec![0.5; layout.dim],
            output_scale: 1.0,
            mean: 0.0,
            noise_variance: Some(noise_floor.max(1e-2)),
        })));
        let mut rng = keyed_rng(options.seed, &[Role::FitRestarts as u64]);
        let noise_lo = libm::log(noise_floor.max(1e-6));
        for _ in 1..count {
            let mut t: Vec<f64> = (0..layout.dim)
                .map(|_| rng.random_range(libm::log(0.05)..libm::log(2.0)))
                .collect();
            t.push(rng.random_range(libm::log(0.1)..libm::log(5.0)));
            t.push(rng.random_range(-1.0..1.0));
            if layout.inferred {
                let hi = libm::log(0.5).max(noise_lo + 1e-9);
                t.push(rng.random_range(noise_lo..hi));
            }
            starts.push(t);
        }
        starts
    }

    fn condition(
        training: Training,
        scaling: Scaling,
        hyper: Hyperparameters,
        noise_mode: NoiseMode,
        report: FitReport,
    ) -> Result<Self> {
        let n = training.x.len();
        let k = training.kernel_matrix(&hyper);
        let chol = Cholesky::factor_with_jitter(&k, n)?;
        let resid: Vec<f64> = training.y.iter().map(|y| y - hyper.mean).collect();
        let alpha = chol.solve(&resid);
        let fit: f64 = resid.iter().zip(&alpha).map(|(r, a)| r * a).sum();
        let lml = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;
        let inv_ls = hyper.lengthscales.iter().map(|l| 1.0 / l).collect();
        Ok(Self {
            hyper,
            noise_mode,
            scaling,
            x: training.x,
            inv_ls,
            chol,
            alpha,
            lml,
            report,
        })
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn noise_mode(&self) -> NoiseMode {
        self.noise_mode
    }

    pub fn dim(&self) -> usize {
        self.inv_ls.len()
    }

    pub fn training_len(&self) -> usize {
        self.x.len()
    }

    /// Log marginal likelihood of the standardized targets at the fitted
    /// hyperparameters.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn fit_report(&self) -> &FitReport {
        &self.report
    }

    /// Jitter that was added to the kernel diagonal to factor it.
    pub fn jitter(&self) -> f64 {
        self.chol.jitter()
    }

    pub fn checkpoint(&self) -> GpCheckpoint {
        GpCheckpoint {
            hyperparameters: self.hyper.clone(),
            noise_mode: self.noise_mode,
            input_bounds: self.scaling.bounds(),
            target_mean: self.scaling.y_mean,
            target_sd: self.scaling.y_sd,
            training_points: self.x.len(),
        }
    }

    /// Prior mean in target units (the level far from data).
    pub fn prior_mean(&self) -> f64 {
        self.scaling.y_mean + self.scaling.y_sd * self.hyper.mean
    }

    /// Prior standard deviation in target units.
    pub fn prior_sd(&self) -> f64 {
        self.scaling.y_sd * self.hyper.output_scale
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Kernel vector between a scaled query and the training inputs.
    fn kernel_row(&self, u: &[f64]) -> Vec<f64> {
        let s2 = self.hyper.output_scale * self.hyper.output_scale;
        self.x
            .iter()
            .map(|xi| s2 * matern52(libm::sqrt(scaled_sq_dist(u, xi, &self.inv_ls))))
            .collect()
    }

    fn kernel_between(&self, u: &[f64], v: &[f64]) -> f64 {
        let s2 = self.hyper.output_scale * self.hyper.output_scale;
        s2 * matern52(libm::sqrt(scaled_sq_dist(u, v, &self.inv_ls)))
    }

    pub fn predict(&self, queries: &[Vec<f64>]) -> Result<Vec<PosteriorSummary>> {
        queries.iter().map(|q| self.predict_one(q)).collect()
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<PosteriorSummary> {
        self.check_dim(x)?;
        let q = self.prepare(x);
        Ok(PosteriorSummary {
            mean: q.mean,
            sd: libm::sqrt(q.var),
        })
    }

    /// Posterior mean only (no triangular solve).
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let u = self.scaling.scale(x);
        let k = self.kernel_row(&u);
        Ok(self.unstandardize_mean(&k))
    }

    fn unstandardize_mean(&self, k: &[f64]) -> f64 {
        let m = self.hyper.mean + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        self.scaling.y_mean + self.scaling.y_sd * m
    }

    pub(crate) fn prepare(&self, x: &[f64]) -> PreparedQuery {
        let u = self.scaling.scale(x);
        let k = self.kernel_row(&u);
        let mean = self.unstandardize_mean(&k);
        let mut v = k;
        self.chol.solve_lower_in_place(&mut v);
        let s2 = self.hyper.output_scale * self.hyper.output_scale;
        let var_std = (s2 - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        PreparedQuery {
            scaled: u,
            mean,
            var: var_std * self.scaling.y_sd * self.scaling.y_sd,
            whitened: v,
        }
    }

    /// Posterior covariance (target units) between two prepared queries.
    pub(crate) fn covariance(&self, a: &PreparedQuery, b: &PreparedQuery) -> f64 {
        let prior = self.kernel_between(&a.scaled, &b.scaled);
        let reduce: f64 = a.whitened.iter().zip(&b.whitened).map(|(x, y)| x * y).sum();
        (prior - reduce) * self.scaling.y_sd * self.scaling.y_sd
    }

    /// Joint posterior mean and covariance (row-major) over the queries.
    pub fn posterior_joint(&self, queries: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        for q in queries {
            self.check_dim(q)?;
        }
        let prepared: Vec<PreparedQuery> = queries.iter().map(|q| self.prepare(q)).collect();
        let m = prepared.len();
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            cov[i * m + i] = prepared[i].var;
            for j in 0..i {
                let c = self.covariance(&prepared[i], &prepared[j]);
                cov[i * m + j] = c;
                cov[j * m + i] = c;
            }
        }
        Ok((prepared.iter().map(|p| p.mean).collect(), cov))
    }

    /// Draws `n_samples` joint posterior samples of the latent function at
    /// the queries. Row `s` holds sample `s`.
    pub fn sample_joint(
        &self,
        queries: &[Vec<f64>],
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        if n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
        }
        let (mean, cov) = self.posterior_joint(queries)?;
        let m = mean.len();
        // Factor in standardized units so the jitter ladder is scale free.
        let var_scale = self.scaling.y_sd * self.scaling.y_sd;
        let std_cov: Vec<f64> = cov.iter().map(|c| c / var_scale).collect();
        let chol = Cholesky::factor_with_jitter(&std_cov, m)?;
        let l = chol.lower();
        let mut rng = keyed_rng(seed, &[Role::JointSample as u64]);
        let mut out = Vec::with_capacity(n_samples);
        let mut z = vec![0.0; m];
        for _ in 0..n_samples {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let row = (0..m)
                .map(|i| {
                    let s: f64 = (0..=i).map(|k| l[i * m + k] * z[k]).sum();
                    mean[i] + self.scaling.y_sd * s
                })
                .collect();
            out.push(row);
        }
        Ok(out)
    }

    /// Gradient of the posterior mean with respect to the (unscaled) input.
    pub fn mean_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let u = self.scaling.scale(x);
        let s2 = self.hyper.output_scale * self.hyper.output_scale;
        let mut g = vec![0.0; self.dim()];
        for (xi, a) in self.x.iter().zip(&self.alpha) {
            let r = libm::sqrt(scaled_sq_dist(&u, xi, &self.inv_ls));
            let common = -s2 * 5.0 / 3.0 * (1.0 + SQRT5 * r) * libm::exp(-SQRT5 * r) * a;
            for k in 0..g.len() {
                g[k] += common * (u[k] - xi[k]) * self.inv_ls[k] * self.inv_ls[k];
            }
        }
        Ok(g.iter()
            .zip(&self.scaling.span)
            .map(|(gk, s)| gk * self.scaling.y_sd / s)
            .collect())
    }
}

/// Posterior quantities at one query, cached for repeated covariance lookups.
#[derive(Debug, Clone)]
pub(crate) struct PreparedQuery {
    scaled: Vec<f64>,
    pub(crate) mean: f64,
    pub(crate) var: f64,
    whitened: Vec<f64>,
}
