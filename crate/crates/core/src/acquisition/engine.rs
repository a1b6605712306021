//! Sequential-greedy batch construction.
//!
//! All Monte Carlo scores share one table of standard normal draws `z[s][k]`
//! (sample `s`, slot `k`). A candidate scored for slot `j` is sampled jointly
//! with the chosen slots through the lower Cholesky factor of their posterior
//! covariance, extended by the candidate's row:
//!
//! ```text
//! v_s = mu_c + sum_{k<j} l_k z[s][k] + l_cc z[s][j]
//! ```
//!
//! The row norm equals the marginal sd, so `|v_s - mu_c| <= sd_c * |z[s][..=j]|`.
//! That bound gives every candidate an exact score upper bound; candidates are
//! visited in decreasing bound order and the scan stops once no remaining
//! bound can beat the best exact score.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    chebyshev, ei, smoothed_log, smoothed_term, smoothing_floor, unit, AcquisitionConfig,
    CandidatePool,
};
use crate::gp::{GaussianProcess, PosteriorSummary, PreparedQuery};
use crate::pareto::Staircase;
use crate::space::{Bounds, FormulationId};
use crate::{Error, Result};

/// Prepared queries are cached for the whole pool while the cache stays
/// below this many floats.
const CACHE_FLOATS: usize = 40_000_000;

/// One chosen batch slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub index: usize,
    pub id: FormulationId,
    pub score: f64,
    /// Marginal posterior of the modeled output (target units).
    pub mean: f64,
    pub sd: f64,
}

/// Two-objective setup: normalized concentration per pool candidate (a known
/// coordinate), the viability normalization, and normalized outcomes of the
/// already evaluated formulations. The hypervolume reference is the origin.
#[derive(Debug, Clone, Copy)]
pub struct TwoObjective<'a> {
    pub concentration: &'a [f64],
    pub viability: Bounds,
    pub known: &'a [(f64, f64)],
}

impl TwoObjective<'_> {
    pub(crate) fn check(&self, pool_len: usize) -> Result<()> {
        if self.concentration.len() != pool_len {
            return Err(Error::DimensionMismatch {
                expected: pool_len,
                found: self.concentration.len(),
            });
        }
        if self.concentration.iter().any(|c| !c.is_finite())
            || self
                .known
                .iter()
                .any(|(a, b)| !(a.is_finite() && b.is_finite()))
        {
            return Err(Error::NonFinite("objective values"));
        }
        Bounds::new(self.viability.min, self.viability.max)?;
        Ok(())
    }
}

pub(crate) enum Objective<'a> {
    Ucb {
        beta: f64,
    },
    Ei {
        incumbent: f64,
    },
    Ehvi(&'a TwoObjective<'a>),
    Parego {
        objectives: &'a TwoObjective<'a>,
        weights: &'a [[f64; 2]],
    },
}

impl Objective<'_> {
    fn uses_samples(&self, q: usize) -> bool {
        match self {
            Objective::Ucb { .. } => false,
            Objective::Ei { .. } => q > 1,
            _ => true,
        }
    }
}

/// Per-slot scoring context built from the fantasized outcomes of prior slots.
enum SlotContext {
    Ucb {
        beta: f64,
    },
    ClosedEi {
        incumbent: f64,
    },
    Ei {
        incumbents: Vec<f64>,
        base: f64,
    },
    Ehvi {
        base: Staircase,
        stairs: Vec<Staircase>,
        conc: Vec<f64>,
        bounds: Bounds,
    },
    Parego {
        weights: [f64; 2],
        rho: f64,
        incumbents: Vec<f64>,
        base: f64,
        conc: Vec<f64>,
        bounds: Bounds,
    },
}

struct Engine<'a> {
    model: &'a GaussianProcess,
    pool: &'a CandidatePool<'a>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    prepared: Vec<Option<PreparedQuery>>,
    samples: usize,
    q: usize,
    z: Vec<f64>,
    chosen: Vec<usize>,
    chosen_prep: Vec<PreparedQuery>,
    lower: Vec<Vec<f64>>,
    slot_samples: Vec<Vec<f64>>,
    taken: Vec<bool>,
}

impl<'a> Engine<'a> {
    fn new(
        model: &'a GaussianProcess,
        pool: &'a CandidatePool<'a>,
        samples: usize,
        q: usize,
        seed: u64,
    ) -> Result<Self> {
        for x in pool.inputs {
            model.check_dim(x)?;
        }
        let cache = pool.len() * (model.training_len() + model.dim()) <= CACHE_FLOATS;
        let mut mean = Vec::with_capacity(pool.len());
        let mut sd = Vec::with_capacity(pool.len());
        let mut prepared = Vec::with_capacity(pool.len());
        for x in pool.inputs {
            let p = model.prepare(x);
            if !(p.mean.is_finite() && p.var.is_finite()) {
                return Err(Error::NonFinite("posterior at a candidate"));
            }
            mean.push(p.mean);
            sd.push(libm::sqrt(p.var));
            prepared.push(cache.then_some(p));
        }
        let z = super::base_normals(samples, q, seed);
        Ok(Self {
            model,
            pool,
            mean,
            sd,
            prepared,
            samples,
            q,
            z,
            chosen: vec![],
            chosen_prep: vec![],
            lower: vec![],
            slot_samples: vec![],
            taken: vec![false; pool.len()],
        })
    }

    fn prepared(&self, c: usize) -> PreparedQuery {
        match &self.prepared[c] {
            Some(p) => p.clone(),
            None => self.model.prepare(&self.pool.inputs[c]),
        }
    }

    /// Row of the extended Cholesky factor for candidate `c`.
    fn conditional(&self, c: usize) -> (Vec<f64>, f64) {
        let prep = self.prepared(c);
        let j = self.chosen.len();
        let mut l = vec![0.0; j];
        for k in 0..j {
            let cov = self.model.covariance(&self.chosen_prep[k], &prep);
            let row = &self.lower[k];
            let s: f64 = row[..k].iter().zip(&l[..k]).map(|(a, b)| a * b).sum();
            l[k] = (cov - s) / row[k];
        }
        let rest = prep.var - l.iter().map(|v| v * v).sum::<f64>();
        (l, libm::sqrt(rest.max(0.0)))
    }

    fn candidate_samples(&self, c: usize, l: &[f64], lcc: f64, out: &mut Vec<f64>) {
        let j = l.len();
        out.clear();
        for s in 0..self.samples {
            let z = &self.z[s * self.q..s * self.q + j + 1];
            let mut v = self.mean[c] + lcc * z[j];
            for k in 0..j {
                v += l[k] * z[k];
            }
            out.push(v);
        }
    }

    fn commit(&mut self, c: usize, mut l: Vec<f64>, lcc: f64, with_samples: bool) {
        let floor = 1e-9 * self.model.prior_sd().max(f64::MIN_POSITIVE);
        l.push(lcc.max(floor));
        if with_samples {
            let mut out = Vec::with_capacity(self.samples);
            let mu = self.mean[c];
            for s in 0..self.samples {
                let z = &self.z[s * self.q..s * self.q + l.len()];
                out.push(mu + l.iter().zip(z).map(|(a, b)| a * b).sum::<f64>());
            }
            self.slot_samples.push(out);
        }
        self.lower.push(l);
        self.chosen_prep.push(self.prepared(c));
        self.chosen.push(c);
        self.taken[c] = true;
    }

    /// Largest `|z[s][..=j]|` over samples.
    fn z_radius(&self, j: usize) -> f64 {
        let mut r: f64 = 0.0;
        for s in 0..self.samples {
            let z = &self.z[s * self.q..s * self.q + j + 1];
            r = r.max(z.iter().map(|v| v * v).sum::<f64>());
        }
        libm::sqrt(r)
    }
}

impl SlotContext {
    fn build(obj: &Objective, e: &Engine, config: &AcquisitionConfig) -> Self {
        let j = e.chosen.len();
        match *obj {
            Objective::Ucb { beta } => SlotContext::Ucb { beta },
            Objective::Ei { incumbent } if e.q == 1 => SlotContext::ClosedEi { incumbent },
            Objective::Ei { incumbent } => {
                let incumbents = (0..e.samples)
                    .map(|s| e.slot_samples.iter().fold(incumbent, |m, y| m.max(y[s])))
                    .collect();
                SlotContext::Ei {
                    incumbents,
                    base: incumbent,
                }
            }
            Objective::Ehvi(t) => {
                let base = Staircase::new(t.known.iter().copied(), 0.0, 0.0);
                let stairs = if j == 0 {
                    vec![]
                } else {
                    (0..e.samples)
                        .map(|s| {
                            let fantasies = e
                                .chosen
                                .iter()
                                .zip(&e.slot_samples)
                                .map(|(&c, y)| (t.concentration[c], unit(&t.viability, y[s])));
                            Staircase::new(t.known.iter().copied().chain(fantasies), 0.0, 0.0)
                        })
                        .collect()
                };
                SlotContext::Ehvi {
                    base,
                    stairs,
                    conc: t.concentration.to_vec(),
                    bounds: t.viability,
                }
            }
            Objective::Parego {
                objectives: t,
                weights,
            } => {
                let w = weights[j];
                let g = |c: f64, v: f64| chebyshev(&[c, v], &w, config.rho);
                let base = t.known.iter().fold(0.0_f64, |m, &(c, v)| m.max(g(c, v)));
                let incumbents = (0..e.samples)
                    .map(|s| {
                        e.chosen
                            .iter()
                            .zip(&e.slot_samples)
                            .fold(base, |m, (&c, y)| {
                                m.max(g(t.concentration[c], unit(&t.viability, y[s])))
                            })
                    })
                    .collect();
                SlotContext::Parego {
                    weights: w,
                    rho: config.rho,
                    incumbents,
                    base,
                    conc: t.concentration.to_vec(),
                    bounds: t.viability,
                }
            }
        }
    }

    /// Upper bound on the exact score of `c`, and whether the bound is the
    /// exact score (no sampling needed).
    fn bound(&self, c: usize, mean: f64, sd: f64, radius: f64, tau: f64) -> (f64, bool) {
        // Guards the bound against rounding in the sample synthesis.
        let hi = mean + sd * radius * (1.0 + 1e-9) + 1e-12;
        match self {
            SlotContext::Ucb { beta } => (mean + beta * sd, false),
            SlotContext::ClosedEi { incumbent } => {
                (ei(&PosteriorSummary { mean, sd }, *incumbent), true)
            }
            SlotContext::Ei { base, .. } => (smoothed_log(&[hi - base], tau), false),
            SlotContext::Ehvi {
                base, conc, bounds, ..
            } => {
                let h = base.improvement(conc[c], unit(bounds, hi));
                if h <= 0.0 {
                    (smoothing_floor(tau), true)
                } else {
                    (smoothed_log(&[h], tau), false)
                }
            }
            SlotContext::Parego {
                weights,
                rho,
                base,
                conc,
                bounds,
                ..
            } => {
                let g = chebyshev(&[conc[c], unit(bounds, hi)], weights, *rho);
                (smoothed_log(&[g - base], tau), false)
            }
        }
    }

    fn score(&self, c: usize, e: &Engine, tau: f64, buf: &mut Vec<f64>) -> f64 {
        let (l, lcc) = e.conditional(c);
        if let SlotContext::Ucb { beta } = self {
            return e.mean[c] + beta * lcc;
        }
        e.candidate_samples(c, &l, lcc, buf);
        let n = buf.len() as f64;
        let total: f64 = match self {
            SlotContext::Ei { incumbents, .. } => buf
                .iter()
                .zip(incumbents)
                .map(|(v, inc)| smoothed_term(v - inc, tau))
                .sum(),
            SlotContext::Ehvi {
                base,
                stairs,
                conc,
                bounds,
            } => buf
                .iter()
                .enumerate()
                .map(|(s, &v)| {
                    let stair = stairs.get(s).unwrap_or(base);
                    smoothed_term(stair.improvement(conc[c], unit(bounds, v)), tau)
                })
                .sum(),
            SlotContext::Parego {
                weights,
                rho,
                incumbents,
                conc,
                bounds,
                ..
            } => buf
                .iter()
                .zip(incumbents)
                .map(|(&v, inc)| {
                    let g = chebyshev(&[conc[c], unit(bounds, v)], weights, *rho);
                    smoothed_term(g - inc, tau)
                })
                .sum(),
            SlotContext::Ucb { .. } | SlotContext::ClosedEi { .. } => unreachable!(),
        };
        libm::log(super::LOG_EPS + total / n)
    }
}

pub(crate) fn run(
    model: &GaussianProcess,
    pool: &CandidatePool,
    config: &AcquisitionConfig,
    objective: Objective,
) -> Result<Vec<Pick>> {
    let q = config.batch_size;
    let samples = if objective.uses_samples(q) {
        config.mc_samples
    } else {
        0
    };
    let mut e = Engine::new(model, pool, samples, q, config.seed)?;
    let mut picks = Vec::with_capacity(q);
    let mut buf = Vec::with_capacity(samples);
    for j in 0..q {
        let ctx = SlotContext::build(&objective, &e, config);
        let radius = if samples > 0 { e.z_radius(j) } else { 0.0 };
        let mut order: Vec<(usize, f64, bool)> = (0..pool.len())
            .filter(|&c| !e.taken[c])
            .map(|c| {
                let (b, exact) = ctx.bound(c, e.mean[c], e.sd[c], radius, config.tau);
                (c, b, exact)
            })
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(pool.ids[a.0].cmp(&pool.ids[b.0])));

        let mut best: Option<(usize, f64)> = None;
        for &(c, bound, exact) in &order {
            if let Some((_, s)) = best {
                if bound < s {
                    break;
                }
            }
            let score = if exact {
                bound
            } else {
                ctx.score(c, &e, config.tau, &mut buf)
            };
            if !score.is_finite() {
                return Err(Error::NonFinite("acquisition score"));
            }
            best = match best {
                Some((b, s)) if s > score || (s == score && pool.ids[b] < pool.ids[c]) => {
                    Some((b, s))
                }
                _ => Some((c, score)),
            };
        }
        let (c, score) = best.ok_or(Error::PoolExhausted {
            available: 0,
            requested: q,
        })?;
        picks.push(Pick {
            index: c,
            id: pool.ids[c],
            score,
            mean: e.mean[c],
            sd: e.sd[c],
        });
        if j + 1 < q {
            let (l, lcc) = e.conditional(c);
            e.commit(c, l, lcc, samples > 0);
        }
    }
    Ok(picks)
}
