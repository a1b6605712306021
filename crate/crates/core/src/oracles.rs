//! Analytic stand-ins for wet-lab measurements.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::keyed_rng;
use crate::{Error, Result};

/// `sin(5x) * (1 - tanh(x^2))` on [-2, 2].
pub fn eval_1d(x: f64) -> Result<f64> {
    if !(-2.0..=2.0).contains(&x) {
        return Err(Error::OutOfRange {
            what: "x",
            value: x,
            min: -2.0,
            max: 2.0,
        });
    }
    Ok(libm::sin(5.0 * x) * (1.0 - libm::tanh(x * x)))
}

pub const RASTRIGIN_A: f64 = 10.0;

/// Rastrigin function with A = 10 on [-2.5, 2.5]^n; global minimum 0 at the origin.
pub fn eval_rastrigin(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Empty("rastrigin input"));
    }
    let mut total = RASTRIGIN_A * x.len() as f64;
    for &xi in x {
        if !(-2.5..=2.5).contains(&xi) {
            return Err(Error::OutOfRange {
                what: "x_i",
                value: xi,
                min: -2.5,
                max: 2.5,
            });
        }
        total += xi * xi - RASTRIGIN_A * libm::cos(2.0 * core::f64::consts::PI * xi);
    }
    Ok(total)
}

/// Pairwise interaction term between two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Logistic toxicity model:
/// `v = logistic(s * (a - sum_i b_i c_i - sum_{i<j} w_ij c_i c_j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToxicityParams {
    pub version: String,
    pub baseline: f64,
    pub slopes: Vec<f64>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    pub steepness: f64,
}

impl ToxicityParams {
    /// Shipped parameters for the seven-CPA space (glycerol, DMSO, EG, 12PD,
    /// 13PD, 3M12PD, urea). EG has the lowest slope, so EG-rich cocktails are
    /// the least toxic; the empty formulation has viability 0.98.
    pub fn cpa_v1() -> Self {
        const STEEPNESS: f64 = 3.0;
        Self {
            version: "cpa-toxicity-v1".into(),
            baseline: libm::log(49.0) / STEEPNESS,
            slopes: alloc::vec![0.32, 0.40, 0.16, 0.36, 0.30, 0.46, 0.55],
            interactions: alloc::vec![
                Interaction {
                    i: 0,
                    j: 1,
                    weight: 0.010
                },
                Interaction {
                    i: 1,
                    j: 6,
                    weight: 0.030
                },
                Interaction {
                    i: 3,
                    j: 5,
                    weight: 0.020
                },
                Interaction {
                    i: 4,
                    j: 6,
                    weight: 0.015
                },
            ],
            steepness: STEEPNESS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slopes.is_empty() {
            return Err(Error::Empty("toxicity slopes"));
        }
        if self.slopes.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
            return Err(Error::InvalidConfig(
                "toxicity slopes must be positive".into(),
            ));
        }
        if !(self.baseline.is_finite() && self.steepness.is_finite() && self.steepness > 0.0) {
            return Err(Error::InvalidConfig(
                "toxicity baseline and steepness must be finite, steepness positive".into(),
            ));
        }
        for w in &self.interactions {
            if w.i >= w.j || w.j >= self.slopes.len() || !w.weight.is_finite() {
                return Err(Error::InvalidConfig(format!("invalid interaction {w:?}")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, concentrations: &[f64]) -> Result<f64> {
        if concentrations.len() != self.slopes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.slopes.len(),
                found: concentrations.len(),
            });
        }
        if concentrations.iter().any(|&c| !(c.is_finite() && c >= 0.0)) {
            return Err(Error::InvalidConfig(
                "concentrations must be finite and non-negative".into(),
            ));
        }
        let linear: f64 = self
            .slopes
            .iter()
            .zip(concentrations)
            .map(|(b, c)| b * c)
            .sum();
        let pairwise: f64 = self
            .interactions
            .iter()
            .map(|w| w.weight * concentrations[w.i] * concentrations[w.j])
            .sum();
        Ok(logistic(
            self.steepness * (self.baseline - linear - pairwise),
        ))
    }
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-t))
}

/// Which analytic function an oracle evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleKind {
    OneDSinTanh,
    Rastrigin,
    Toxicity(ToxicityParams),
}

/// An oracle plus its replicate-noise simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    #[serde(flatten)]
    pub kind: OracleKind,
    pub noise_sd: f64,
    pub replicates: usize,
    /// Replicate values are clamped into this range (viability oracles only).
    #[serde(default)]
    pub clamp: Option<(f64, f64)>,
}

impl OracleSpec {
    pub fn one_d() -> Self {
        Self {
            kind: OracleKind::OneDSinTanh,
            noise_sd: 0.0,
            replicates: 1,
            clamp: None,
        }
    }

    pub fn rastrigin() -> Self {
        Self {
            kind: OracleKind::Rastrigin,
            noise_sd: 0.0,
            replicates: 1,
            clamp: None,
        }
    }

    /// Toxicity oracle with triplicate measurements, noise sd 0.05, clamped to [0, 1.2].
    pub fn toxicity(params: ToxicityParams) -> Self {
        Self {
            kind: OracleKind::Toxicity(params),
            noise_sd: 0.05,
            replicates: 3,
            clamp: Some((0.0, 1.2)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidConfig("noise_sd must be non-negative".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if let Some((lo, hi)) = self.clamp {
            if !(lo < hi) {
                return Err(Error::InvalidConfig("clamp range is empty".into()));
            }
        }
        if let OracleKind::Toxicity(p) = &self.kind {
            p.validate()?;
        }
        Ok(())
    }

    /// Noise-free value at `x` (molar concentrations for toxicity).
    pub fn truth(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            OracleKind::OneDSinTanh => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        found: x.len(),
                    });
                }
                eval_1d(x[0])
            }
            OracleKind::Rastrigin => eval_rastrigin(x),
            OracleKind::Toxicity(p) => p.eval(x),
        }
    }

    /// Simulated replicate measurements at `x`; `seed` should be keyed by
    /// (campaign, iteration, formulation).
    pub fn observe(&self, x: &[f64], seed: u64) -> Result<Replicates> {
        let truth = self.truth(x)?;
        let mut rng = keyed_rng(seed, &[crate::rng::Role::Observe as u64]);
        let noise = Normal::new(0.0, self.noise_sd)
            .map_err(|_| Error::InvalidConfig("noise_sd must be non-negative".into()))?;
        let values = (0..self.replicates)
            .map(|_| {
                let v = if self.noise_sd > 0.0 {
                    truth + noise.sample(&mut rng)
                } else {
                    // Keep the stream position independent of the noise level.
                    let _: f64 = rng.random();
                    truth
                };
                match self.clamp {
                    Some((lo, hi)) => v.clamp(lo, hi),
                    None => v,
                }
            })
            .collect();
        Replicates::from_values(values)
    }
}

/// Replicate measurements with their summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicates {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance; 0 for a single replicate.
    pub variance: f64,
    pub count: usize,
}

impl Replicates {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("replicates"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("replicates"));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Ok(Self {
            values,
            mean,
            variance,
            count: n,
        })
    }

    /// Noise variance of the mean: sample variance / count, floored.
    pub fn variance_of_mean(&self, floor: f64) -> f64 {
        (self.variance / self.count as f64).max(floor)
    }
}
