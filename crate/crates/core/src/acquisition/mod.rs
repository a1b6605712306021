//! Batch candidate selection over a finite pool.
//!
//! Model-based batches are built sequential-greedily: slot `j` scores every
//! remaining candidate jointly with the `j` candidates already chosen, so the
//! sampled outcomes of earlier slots act as fantasies for later ones.
//! Monte Carlo scores are passed through
//!
//! ```text
//! T(d_1..d_S) = ln(eps + mean_s tau * softplus(d_s / tau))
//! ```
//!
//! where `d_s` is the per-sample improvement (hypervolume improvement,
//! scalarized improvement or plain improvement).

mod engine;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::gp::{GaussianProcess, PosteriorSummary};
use crate::pareto::Staircase;
use crate::rng::{keyed_rng, Role};
use crate::space::{Bounds, Formulation, FormulationId};
use crate::{Error, Result};

pub use engine::{Pick, TwoObjective};

/// Floor added inside the smoothed log.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Ucb,
    Ei,
    Qlognparego,
    Qlognehvi,
    Qvarlognehvi,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Random,
        Method::Ucb,
        Method::Ei,
        Method::Qlognparego,
        Method::Qlognehvi,
        Method::Qvarlognehvi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Ucb => "ucb",
            Method::Ei => "ei",
            Method::Qlognparego => "qlognparego",
            Method::Qlognehvi => "qlognehvi",
            Method::Qvarlognehvi => "qvarlognehvi",
        }
    }

    /// Whether the method optimizes the two-objective (concentration,
    /// viability) problem.
    pub fn is_multi_objective(self) -> bool {
        matches!(
            self,
            Method::Random | Method::Qlognparego | Method::Qlognehvi | Method::Qvarlognehvi
        )
    }

    pub fn needs_model(self) -> bool {
        self != Method::Random
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub method: Method,
    pub batch_size: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub beta: f64,
    pub rho: f64,
    pub tau: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            method: Method::Qlognehvi,
            batch_size: 10,
            mc_samples: 4096,
            seed: 0,
            beta: 2.0,
            rho: 0.05,
            tau: 1e-3,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(String::from(m)));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.mc_samples < 64 {
            return bad("mc_samples must be at least 64");
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad("beta must be non-negative");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1)");
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad("tau must be positive");
        }
        Ok(())
    }
}

/// One suggested formulation with its predicted viability and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestedCandidate {
    pub formulation: Formulation,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSuggestion {
    pub method: Method,
    pub seed: u64,
    pub candidates: Vec<SuggestedCandidate>,
    /// Identifies the model checkpoint the scores came from.
    #[serde(default)]
    pub model: Option<String>,
}

impl BatchSuggestion {
    pub fn ids(&self) -> Vec<FormulationId> {
        self.candidates.iter().map(|c| c.formulation.id()).collect()
    }
}

/// Pool view handed to the selectors: parallel id and GP-input slices.
#[derive(Debug, Clone, Copy)]
pub struct CandidatePool<'a> {
    pub ids: &'a [FormulationId],
    pub inputs: &'a [Vec<f64>],
}

impl<'a> CandidatePool<'a> {
    pub fn new(ids: &'a [FormulationId], inputs: &'a [Vec<f64>]) -> Result<Self> {
        if ids.len() != inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                found: inputs.len(),
            });
        }
        Ok(Self { ids, inputs })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn require(&self, q: usize) -> Result<()> {
        if q > self.len() {
            return Err(Error::PoolExhausted {
                available: self.len(),
                requested: q,
            });
        }
        Ok(())
    }
}

pub fn normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// `mu + beta * sigma`.
pub fn ucb(p: &PosteriorSummary, beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidConfig("beta must be non-negative".into()));
    }
    if p.sd < 0.0 {
        return Err(Error::InvalidConfig("sd must be non-negative".into()));
    }
    Ok(p.mean + beta * p.sd)
}

/// Closed-form expected improvement over `incumbent` (maximization).
pub fn ei(p: &PosteriorSummary, incumbent: f64) -> f64 {
    let gap = p.mean - incumbent;
    if !(p.sd > 0.0) {
        return gap.max(0.0);
    }
    let z = gap / p.sd;
    (gap * normal_cdf(z) + p.sd * normal_pdf(z)).max(0.0)
}

/// Monte Carlo estimate of expected improvement over stratified base samples.
pub fn mc_expected_improvement(p: &PosteriorSummary, incumbent: f64, n: usize, seed: u64) -> f64 {
    let total: f64 = base_normals(n, 1, seed)
        .into_iter()
        .map(|z| (p.mean + p.sd * z - incumbent).max(0.0))
        .sum();
    total / n.max(1) as f64
}

/// Monte Carlo estimate of expected hypervolume improvement of a
/// candidate with known normalized concentration and normal viability
/// posterior (normalized units) over `known` (normalized, reference origin).
pub fn mc_expected_hvi(
    known: &[(f64, f64)],
    concentration: f64,
    viability: &PosteriorSummary,
    n: usize,
    seed: u64,
) -> f64 {
    let stair = Staircase::new(known.iter().copied(), 0.0, 0.0);
    let total: f64 = base_normals(n, 1, seed)
        .into_iter()
        .map(|z| stair.improvement(concentration, viability.mean + viability.sd * z))
        .sum();
    total / n.max(1) as f64
}

/// Latin hypercube standard normal draws, row-major `samples x cols`: each
/// column has exactly one draw in every probability stratum of width
/// `1 / samples`, with strata shuffled independently per column.
pub(crate) fn base_normals(samples: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = keyed_rng(seed, &[Role::McBase as u64]);
    let mut out = alloc::vec![0.0; samples * cols];
    let mut strata: Vec<usize> = (0..samples).collect();
    for k in 0..cols {
        for i in (1..samples).rev() {
            strata.swap(i, rng.random_range(0..=i));
        }
        for (s, &stratum) in strata.iter().enumerate() {
            let u = (stratum as f64 + rng.random::<f64>()) / samples as f64;
            out[s * cols + k] = normal_quantile(u.clamp(1e-300, 1.0 - 1e-16));
        }
    }
    out
}

/// Inverse standard normal CDF (Wichura's AS 241, about 1e-16 relative).
pub fn normal_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A241, r) / poly(&B241, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = libm::sqrt(-libm::log(r));
    let v = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C241, r) / poly(&D241, r)
    } else {
        let r = r - 5.0;
        poly(&E241, r) / poly(&F241, r)
    };
    if q < 0.0 {
        -v
    } else {
        v
    }
}

fn poly(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

const A241: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B241: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const C241: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D241: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E241: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F241: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Per-sample contribution inside the smoothed log.
pub(crate) fn smoothed_term(d: f64, tau: f64) -> f64 {
    tau * softplus(d / tau)
}

/// Smoothed log of the mean improvement over samples `d`.
pub fn smoothed_log(d: &[f64], tau: f64) -> f64 {
    let mean = d.iter().map(|&v| smoothed_term(v, tau)).sum::<f64>() / d.len().max(1) as f64;
    libm::log(LOG_EPS + mean)
}

/// Score of a candidate whose improvement is zero in every sample.
pub fn smoothing_floor(tau: f64) -> f64 {
    smoothed_log(&[0.0], tau)
}

/// `sum_i w_i f_i`.
pub fn weighted_sum(objectives: &[f64], weights: &[f64]) -> Result<f64> {
    if objectives.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: objectives.len(),
        });
    }
    if weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
        return Err(Error::InvalidWeights("weights must be non-negative".into()));
    }
    Ok(objectives.iter().zip(weights).map(|(f, w)| f * w).sum())
}

/// Augmented Chebyshev scalarization `max_i(theta_i f_i) + rho * sum_i theta_i f_i`.
pub fn parego_scalarize(objectives: &[f64], weights: &[f64], rho: f64) -> Result<f64> {
    if objectives.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: objectives.len(),
        });
    }
    if weights.is_empty() || weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
        return Err(Error::InvalidWeights("weights must be non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {total}, not 1"
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig("rho must lie in [0, 1)".into()));
    }
    Ok(chebyshev(objectives, weights, rho))
}

pub(crate) fn chebyshev(objectives: &[f64], weights: &[f64], rho: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (f, w) in objectives.iter().zip(weights) {
        max = max.max(f * w);
        sum += f * w;
    }
    max + rho * sum
}

/// Uniform draw from the probability simplex, keyed by (seed, slot).
pub fn simplex_weights(dim: usize, seed: u64, slot: u64) -> Vec<f64> {
    let mut rng = keyed_rng(seed, &[Role::ScalarizationWeights as u64, slot]);
    let e: Vec<f64> = (0..dim).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Uniform sample of `q` pool indices without replacement.
pub fn random_select(pool_len: usize, q: usize, seed: u64) -> Result<Vec<usize>> {
    if q > pool_len {
        return Err(Error::PoolExhausted {
            available: pool_len,
            requested: q,
        });
    }
    let mut rng = keyed_rng(seed, &[Role::RandomSelect as u64]);
    // Partial Fisher-Yates over an index table.
    let mut idx: Vec<usize> = (0..pool_len).collect();
    for i in 0..q {
        let j = rng.random_range(i..pool_len);
        idx.swap(i, j);
    }
    idx.truncate(q);
    Ok(idx)
}

/// Batch UCB: each slot maximizes `mu + beta * sd` with the sd conditioned on
/// the slots already chosen (their outcomes fixed at the posterior mean).
pub fn ucb_select(
    model: &GaussianProcess,
    pool: &CandidatePool,
    config: &AcquisitionConfig,
) -> Result<Vec<Pick>> {
    config.validate()?;
    pool.require(config.batch_size)?;
    engine::run(
        model,
        pool,
        config,
        engine::Objective::Ucb { beta: config.beta },
    )
}

/// Expected improvement over `incumbent`; closed form for `q = 1`, Monte
/// Carlo with fantasies otherwise.
pub fn ei_select(
    model: &GaussianProcess,
    pool: &CandidatePool,
    incumbent: f64,
    config: &AcquisitionConfig,
) -> Result<Vec<Pick>> {
    config.validate()?;
    pool.require(config.batch_size)?;
    engine::run(model, pool, config, engine::Objective::Ei { incumbent })
}

/// Smoothed-log noisy expected hypervolume improvement batch.
pub fn qlognehvi_select(
    model: &GaussianProcess,
    pool: &CandidatePool,
    objectives: &TwoObjective,
    config: &AcquisitionConfig,
) -> Result<Vec<Pick>> {
    config.validate()?;
    pool.require(config.batch_size)?;
    objectives.check(pool.len())?;
    engine::run(model, pool, config, engine::Objective::Ehvi(objectives))
}

/// Smoothed-log scalarized expected improvement batch with one simplex
/// weight vector per slot.
pub fn qlognparego_select(
    model: &GaussianProcess,
    pool: &CandidatePool,
    objectives: &TwoObjective,
    config: &AcquisitionConfig,
) -> Result<Vec<Pick>> {
    let weights: Vec<[f64; 2]> = (0..config.batch_size as u64)
        .map(|slot| {
            let w = simplex_weights(2, config.seed, slot);
            [w[0], w[1]]
        })
        .collect();
    qlognparego_select_with_weights(model, pool, objectives, &weights, config)
}

/// As [`qlognparego_select`] with explicit per-slot weights
/// (`[concentration, viability]`).
pub fn qlognparego_select_with_weights(
    model: &GaussianProcess,
    pool: &CandidatePool,
    objectives: &TwoObjective,
    weights: &[[f64; 2]],
    config: &AcquisitionConfig,
) -> Result<Vec<Pick>> {
    config.validate()?;
    pool.require(config.batch_size)?;
    objectives.check(pool.len())?;
    if weights.len() != config.batch_size {
        return Err(Error::InvalidWeights(format!(
            "{} weight vectors for batch size {}",
            weights.len(),
            config.batch_size
        )));
    }
    for w in weights {
        parego_scalarize(&[0.0, 0.0], w, config.rho)?;
    }
    engine::run(
        model,
        pool,
        config,
        engine::Objective::Parego {
            objectives,
            weights,
        },
    )
}

/// Normalization helper: maps a raw viability to the unit scale of `bounds`
/// without clamping.
pub(crate) fn unit(bounds: &Bounds, v: f64) -> f64 {
    (v - bounds.min) / (bounds.max - bounds.min)
}
