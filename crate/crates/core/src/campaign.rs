//! Campaign state machine: suggest, ingest, refit, metrics.
//!
//! ```text
//! ready_to_suggest --suggest--> awaiting_results --ingest--> ready_to_suggest
//!                                                        \-> completed (budget reached)
//! ```
//!
//! Every random draw is keyed by the master seed, a hash of the campaign id,
//! the iteration and a [`Role`], so a campaign is a pure function of its
//! configuration and the results fed into it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    self, AcquisitionConfig, BatchSuggestion, CandidatePool, Method, SuggestedCandidate,
    TwoObjective,
};
use crate::gp::{FitOptions, GaussianProcess, GpCheckpoint, Noise};
use crate::kcenter::kcenter_select;
use crate::oracles::{OracleSpec, Replicates};
use crate::pareto::{self, ObjectiveVector, ScoredPoint};
use crate::rng::{derive_seed, fnv1a, Role};
use crate::space::{
    enumerate_pool, Bounds, ComponentSet, Formulation, FormulationId, DEFAULT_MAX_POOL,
};
use crate::stats;
use crate::{Error, Result};

/// Accepted range for submitted replicate viabilities.
pub const VIABILITY_RANGE: (f64, f64) = (0.0, 1.2);

/// Floor on per-point noise variances in the variance-aware model.
pub const NOISE_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingResults,
    ReadyToSuggest,
    Completed,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::AwaitingResults => "awaiting_results",
            Status::ReadyToSuggest => "ready_to_suggest",
            Status::Completed => "completed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Lab,
    Oracle,
}

/// Replicate viabilities of one formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub formulation: Formulation,
    #[serde(flatten)]
    pub replicates: Replicates,
    pub iteration: usize,
    pub source: Source,
}

/// Submitted replicates for one formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub id: FormulationId,
    pub replicates: Vec<f64>,
}

/// Initial data point: any formulation with the campaign's components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub formulation: Formulation,
    pub replicates: Vec<f64>,
    #[serde(default = "default_source")]
    pub source: Source,
}

fn default_source() -> Source {
    Source::Lab
}

/// Normalization for (total concentration, viability).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBounds {
    pub concentration: Bounds,
    pub viability: Bounds,
}

impl ObjectiveBounds {
    /// Concentration over the space's total range, viability over [0, 1].
    pub fn for_space(space: &ComponentSet) -> Result<Self> {
        Ok(Self {
            concentration: Bounds::new(space.total_min, space.total_max)?,
            viability: Bounds::new(0.0, 1.0)?,
        })
    }
}

/// Surrogate fitting options for campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Start the optimizer from the previous iteration's hyperparameters.
    pub warm_start: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 200,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub id: String,
    #[serde(default)]
    pub space: ComponentSet,
    /// Method and acquisition parameters; `seed` is replaced per iteration by
    /// a key derived from the master seed.
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub seed: u64,
    /// Iteration budget.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub model: ModelOptions,
    #[serde(default)]
    pub objective_bounds: Option<ObjectiveBounds>,
    #[serde(default = "default_max_pool")]
    pub max_pool: usize,
}

fn default_iterations() -> usize {
    8
}

fn default_max_pool() -> usize {
    DEFAULT_MAX_POOL
}

impl CampaignConfig {
    pub fn new(id: impl Into<String>, method: Method) -> Self {
        Self {
            id: id.into(),
            space: ComponentSet::default(),
            acquisition: AcquisitionConfig {
                method,
                ..AcquisitionConfig::default()
            },
            seed: 0,
            iterations: default_iterations(),
            model: ModelOptions::default(),
            objective_bounds: None,
            max_pool: DEFAULT_MAX_POOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
            || self.id.starts_with('.')
        {
            return Err(Error::InvalidConfig(format!(
                "campaign id {:?} must be non-empty ASCII letters, digits, '-', '_' or '.'",
                self.id
            )));
        }
        self.space.validate()?;
        self.acquisition.validate()?;
        if !self.acquisition.method.is_multi_objective() {
            return Err(Error::InvalidConfig(format!(
                "method {} optimizes a single objective; campaigns accept random, qlognparego, qlognehvi or qvarlognehvi",
                self.acquisition.method
            )));
        }
        if self.model.restarts == 0 {
            return Err(Error::InvalidConfig(
                "model.restarts must be at least 1".into(),
            ));
        }
        if let Some(b) = &self.objective_bounds {
            Bounds::new(b.concentration.min, b.concentration.max)?;
            Bounds::new(b.viability.min, b.viability.max)?;
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<ObjectiveBounds> {
        match self.objective_bounds {
            Some(b) => Ok(b),
            None => ObjectiveBounds::for_space(&self.space),
        }
    }

    fn key(&self) -> u64 {
        fnv1a(self.id.as_bytes())
    }
}

/// Enumerated candidate pool with an id index.
#[derive(Debug, Clone)]
pub struct Pool {
    formulations: Vec<Formulation>,
    index: BTreeMap<FormulationId, usize>,
    fingerprint: u64,
}

/// Identifies the pool a campaign was created against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolRef {
    pub size: usize,
    #[serde(with = "hex_u64")]
    pub fingerprint: u64,
}

impl Pool {
    pub fn enumerate(space: &ComponentSet, max_pool: usize) -> Result<Self> {
        Self::from_formulations(enumerate_pool(space, max_pool)?)
    }

    pub fn from_formulations(formulations: Vec<Formulation>) -> Result<Self> {
        if formulations.is_empty() {
            return Err(Error::Empty("pool"));
        }
        let mut index = BTreeMap::new();
        let mut bytes = Vec::with_capacity(formulations.len() * 8);
        for (i, f) in formulations.iter().enumerate() {
            if index.insert(f.id(), i).is_some() {
                return Err(Error::DuplicateResults(alloc::vec![f.id().to_string()]));
            }
            bytes.extend_from_slice(&f.id().0.to_le_bytes());
        }
        Ok(Self {
            fingerprint: fnv1a(&bytes),
            formulations,
            index,
        })
    }

    pub fn formulations(&self) -> &[Formulation] {
        &self.formulations
    }

    pub fn len(&self) -> usize {
        self.formulations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulations.is_empty()
    }

    pub fn get(&self, id: FormulationId) -> Option<&Formulation> {
        self.index.get(&id).map(|&i| &self.formulations[i])
    }

    pub fn reference(&self) -> PoolRef {
        PoolRef {
            size: self.len(),
            fingerprint: self.fingerprint,
        }
    }
}

/// Quality indicators after an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub iteration: usize,
    pub observations: usize,
    pub hypervolume: f64,
    /// Filled when a reference front is supplied.
    #[serde(default)]
    pub igd: Option<f64>,
    pub bounds: ObjectiveBounds,
    /// Observations whose objectives fell outside the bounds and were clamped.
    pub clamped: usize,
    pub front: Vec<FormulationId>,
}

/// Pareto member with its composition, in raw and normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub formulation: Formulation,
    pub concentration: f64,
    pub viability: f64,
    pub normalized: ObjectiveVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub config: CampaignConfig,
    pub status: Status,
    /// Incremented by every mutation; used for optimistic concurrency.
    pub version: u64,
    /// Completed iterations.
    pub iteration: usize,
    pub pool: PoolRef,
    pub observations: Vec<Observation>,
    pub pending: Option<BatchSuggestion>,
    /// Surrogate behind the pending or latest suggestion.
    pub model: Option<GpCheckpoint>,
    pub metrics: Vec<MetricRecord>,
}

impl Campaign {
    pub fn create(config: CampaignConfig, pool: &Pool, initial: Vec<Measurement>) -> Result<Self> {
        config.validate()?;
        config.bounds()?;
        let mut seen = BTreeSet::new();
        let mut duplicates = Vec::new();
        let mut observations = Vec::with_capacity(initial.len());
        for m in initial {
            if m.formulation.dim() != config.space.dim()
                || (m.formulation.increment() - config.space.increment).abs() > 1e-9
            {
                return Err(Error::InvalidConfig(format!(
                    "initial formulation {} does not use the campaign's {} components at {} M steps",
                    m.formulation.id(),
                    config.space.dim(),
                    config.space.increment
                )));
            }
            if !seen.insert(m.formulation.id()) {
                duplicates.push(m.formulation.id().to_string());
            }
            check_viabilities(&[(m.formulation.id(), &m.replicates)])?;
            observations.push(Observation {
                replicates: Replicates::from_values(m.replicates)?,
                formulation: m.formulation,
                iteration: 0,
                source: m.source,
            });
        }
        if !duplicates.is_empty() {
            return Err(Error::DuplicateResults(duplicates));
        }
        let status = if config.iterations == 0 {
            Status::Completed
        } else {
            Status::ReadyToSuggest
        };
        let mut campaign = Self {
            pool: pool.reference(),
            config,
            status,
            version: 1,
            iteration: 0,
            observations,
            pending: None,
            model: None,
            metrics: Vec::new(),
        };
        let record = campaign.metric_record(0)?;
        campaign.metrics.push(record);
        Ok(campaign)
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    pub fn method(&self) -> Method {
        self.config.acquisition.method
    }

    pub fn known_ids(&self) -> BTreeSet<FormulationId> {
        self.observations
            .iter()
            .map(|o| o.formulation.id())
            .collect()
    }

    /// Seed for the acquisition step of the current iteration.
    pub fn acquisition_seed(&self) -> u64 {
        derive_seed(
            self.config.seed,
            &[
                self.config.key(),
                self.iteration as u64,
                Role::McBase as u64,
            ],
        )
    }

    fn check_pool(&self, pool: &Pool) -> Result<()> {
        if pool.reference() != self.pool {
            return Err(Error::InvalidConfig(format!(
                "pool mismatch: campaign was created against {} formulations (fingerprint {:016x}), got {} ({:016x})",
                self.pool.size,
                self.pool.fingerprint,
                pool.len(),
                pool.fingerprint
            )));
        }
        Ok(())
    }

    /// Surrogate fitted to the current observations.
    pub fn fit_model(&self) -> Result<GaussianProcess> {
        let inputs: Vec<Vec<f64>> = self
            .observations
            .iter()
            .map(|o| o.formulation.concentrations())
            .collect();
        let targets: Vec<f64> = self
            .observations
            .iter()
            .map(|o| o.replicates.mean)
            .collect();
        let noise = match self.method() {
            Method::Qvarlognehvi => Noise::Fixed(
                self.observations
                    .iter()
                    .map(|o| o.replicates.variance_of_mean(NOISE_VARIANCE_FLOOR))
                    .collect(),
            ),
            _ => Noise::Inferred,
        };
        let space = &self.config.space;
        let top = space
            .per_component_max
            .unwrap_or(space.total_max)
            .min(space.total_max);
        let options = FitOptions {
            restarts: self.config.model.restarts,
            max_iters: self.config.model.max_iters,
            seed: derive_seed(
                self.config.seed,
                &[
                    self.config.key(),
                    self.iteration as u64,
                    Role::FitRestarts as u64,
                ],
            ),
            input_bounds: Some(alloc::vec![Bounds::new(0.0, top)?; space.dim()]),
            warm_start: self
                .config
                .model
                .warm_start
                .then(|| self.model.as_ref().map(|m| m.hyperparameters.clone()))
                .flatten(),
            ..FitOptions::default()
        };
        GaussianProcess::fit(&inputs, &targets, noise, &options)
    }

    /// Produces the next batch, or returns the pending one unchanged.
    pub fn suggest(&mut self, pool: &Pool) -> Result<BatchSuggestion> {
        match self.status {
            Status::AwaitingResults => {
                return self.pending.clone().ok_or(Error::InvalidConfig(
                    "awaiting results without a pending batch".into(),
                ))
            }
            Status::Completed => {
                return Err(Error::WrongStatus {
                    expected: Status::ReadyToSuggest.name(),
                    actual: self.status.name(),
                })
            }
            Status::ReadyToSuggest => {}
        }
        self.check_pool(pool)?;
        let model = if self.method().needs_model() {
            Some(self.fit_model()?)
        } else {
            None
        };
        let suggestion = self.select(pool, model.as_ref())?;
        self.model = model
            .as_ref()
            .map(GaussianProcess::checkpoint)
            .or(self.model.take());
        self.pending = Some(suggestion.clone());
        self.status = Status::AwaitingResults;
        self.version += 1;
        Ok(suggestion)
    }

    /// Runs the configured selector with an already fitted surrogate.
    pub fn select(&self, pool: &Pool, model: Option<&GaussianProcess>) -> Result<BatchSuggestion> {
        let known = self.known_ids();
        let candidates: Vec<&Formulation> = pool
            .formulations()
            .iter()
            .filter(|f| !known.contains(&f.id()))
            .collect();
        let config = AcquisitionConfig {
            seed: self.acquisition_seed(),
            ..self.config.acquisition.clone()
        };
        if candidates.len() < config.batch_size {
            return Err(Error::PoolExhausted {
                available: candidates.len(),
                requested: config.batch_size,
            });
        }
        let ids: Vec<FormulationId> = candidates.iter().map(|f| f.id()).collect();
        let picks: Vec<(usize, Option<f64>, Option<f64>, f64)> = match (config.method, model) {
            (Method::Random, _) => {
                acquisition::random_select(ids.len(), config.batch_size, config.seed)?
                    .into_iter()
                    .map(|i| (i, None, None, 0.0))
                    .collect()
            }
            (method, Some(model)) => {
                let inputs: Vec<Vec<f64>> = candidates.iter().map(|f| f.concentrations()).collect();
                let cpool = CandidatePool::new(&ids, &inputs)?;
                let bounds = self.config.bounds()?;
                let concentration: Vec<f64> = candidates
                    .iter()
                    .map(|f| bounds.concentration.normalize(f.total()).0)
                    .collect();
                let known_points: Vec<(f64, f64)> = self
                    .normalized_points(&bounds)
                    .into_iter()
                    .map(|(_, p, _)| (p[0], p[1]))
                    .collect();
                let objectives = TwoObjective {
                    concentration: &concentration,
                    viability: bounds.viability,
                    known: &known_points,
                };
                let picks = match method {
                    Method::Qlognehvi | Method::Qvarlognehvi => {
                        acquisition::qlognehvi_select(model, &cpool, &objectives, &config)?
                    }
                    Method::Qlognparego => {
                        acquisition::qlognparego_select(model, &cpool, &objectives, &config)?
                    }
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "method {other} is not available for campaigns"
                        )))
                    }
                };
                picks
                    .into_iter()
                    .map(|p| (p.index, Some(p.mean), Some(p.sd), p.score))
                    .collect()
            }
            (method, None) => {
                return Err(Error::InvalidConfig(format!(
                    "method {method} needs a fitted model"
                )))
            }
        };
        let mut chosen = BTreeSet::new();
        let mut out = Vec::with_capacity(picks.len());
        for (i, mean, sd, score) in picks {
            let f = candidates[i];
            if known.contains(&f.id()) || !chosen.insert(f.id()) {
                return Err(Error::InvalidConfig(format!(
                    "selector returned a known or repeated formulation {}",
                    f.id()
                )));
            }
            out.push(SuggestedCandidate {
                formulation: f.clone(),
                mean,
                sd,
                score,
            });
        }
        Ok(BatchSuggestion {
            method: config.method,
            seed: config.seed,
            candidates: out,
            model: model.map(|_| format!("{}/iteration-{}", self.config.id, self.iteration)),
        })
    }

    /// Ingests replicate results for the pending batch atomically.
    pub fn ingest(
        &mut self,
        results: Vec<ResultEntry>,
        allow_partial: bool,
        source: Source,
    ) -> Result<MetricRecord> {
        if self.status != Status::AwaitingResults {
            return Err(Error::WrongStatus {
                expected: Status::AwaitingResults.name(),
                actual: self.status.name(),
            });
        }
        let pending = self.pending.as_ref().ok_or(Error::InvalidConfig(
            "awaiting results without a pending batch".into(),
        ))?;
        let by_id: BTreeMap<FormulationId, &Formulation> = pending
            .candidates
            .iter()
            .map(|c| (c.formulation.id(), &c.formulation))
            .collect();

        let mut seen = BTreeSet::new();
        let mut unknown = Vec::new();
        let mut duplicates = Vec::new();
        for r in &results {
            if !by_id.contains_key(&r.id) {
                unknown.push(r.id.to_string());
            } else if !seen.insert(r.id) {
                duplicates.push(r.id.to_string());
            }
        }
        if !unknown.is_empty() {
            return Err(Error::UnknownFormulations(unknown));
        }
        if !duplicates.is_empty() {
            return Err(Error::DuplicateResults(duplicates));
        }
        if !allow_partial {
            let missing: Vec<String> = by_id
                .keys()
                .filter(|id| !seen.contains(id))
                .map(|id| id.to_string())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingResults(missing));
            }
        }
        if results.is_empty() {
            return Err(Error::Empty("results"));
        }
        let checks: Vec<(FormulationId, &Vec<f64>)> =
            results.iter().map(|r| (r.id, &r.replicates)).collect();
        check_viabilities(&checks)?;

        let next = self.iteration + 1;
        // Keep the suggestion order so the observation log is independent of
        // how the results were listed.
        let mut entries: BTreeMap<FormulationId, Vec<f64>> =
            results.into_iter().map(|r| (r.id, r.replicates)).collect();
        let mut new = Vec::new();
        for c in &pending.candidates {
            if let Some(values) = entries.remove(&c.formulation.id()) {
                new.push(Observation {
                    formulation: c.formulation.clone(),
                    replicates: Replicates::from_values(values)?,
                    iteration: next,
                    source,
                });
            }
        }
        self.observations.extend(new);
        self.iteration = next;
        self.pending = None;
        self.status = if self.iteration >= self.config.iterations {
            Status::Completed
        } else {
            Status::ReadyToSuggest
        };
        let record = self.metric_record(next)?;
        self.metrics.push(record.clone());
        self.version += 1;
        Ok(record)
    }

    /// Normalized (concentration, viability) of each observation, with a
    /// clamping flag.
    pub fn normalized_points(
        &self,
        bounds: &ObjectiveBounds,
    ) -> Vec<(FormulationId, [f64; 2], bool)> {
        self.observations
            .iter()
            .map(|o| {
                let (c, cc) = bounds.concentration.normalize(o.formulation.total());
                let (v, vc) = bounds.viability.normalize(o.replicates.mean);
                (o.formulation.id(), [c, v], cc || vc)
            })
            .collect()
    }

    fn points_up_to(
        &self,
        iteration: usize,
        bounds: &ObjectiveBounds,
    ) -> (Vec<ScoredPoint>, usize) {
        let mut clamped = 0;
        let points = self
            .observations
            .iter()
            .zip(self.normalized_points(bounds))
            .filter(|(o, _)| o.iteration <= iteration)
            .map(|(_, (id, p, c))| {
                clamped += usize::from(c);
                ScoredPoint::new(Some(id), p.to_vec())
            })
            .collect();
        (points, clamped)
    }

    fn metric_record(&self, iteration: usize) -> Result<MetricRecord> {
        let bounds = self.config.bounds()?;
        let (points, clamped) = self.points_up_to(iteration, &bounds);
        let (hypervolume, front) = if points.is_empty() {
            (0.0, Vec::new())
        } else {
            let front = pareto::pareto_front(&points)?;
            (
                pareto::hypervolume(&front.objectives(), &[0.0, 0.0])?,
                front.ids(),
            )
        };
        Ok(MetricRecord {
            iteration,
            observations: points.len(),
            hypervolume,
            igd: None,
            bounds,
            clamped,
            front,
        })
    }

    /// Current Pareto members with compositions.
    pub fn front(&self) -> Result<Vec<FrontMember>> {
        let bounds = self.config.bounds()?;
        let (points, _) = self.points_up_to(self.iteration, &bounds);
        if points.is_empty() {
            return Ok(Vec::new());
        }
        let front = pareto::pareto_front(&points)?;
        let by_id: BTreeMap<FormulationId, &Observation> = self
            .observations
            .iter()
            .map(|o| (o.formulation.id(), o))
            .collect();
        Ok(front
            .members
            .iter()
            .filter_map(|m| {
                let o = by_id.get(&m.id?)?;
                Some(FrontMember {
                    formulation: o.formulation.clone(),
                    concentration: o.formulation.total(),
                    viability: o.replicates.mean,
                    normalized: m.objectives.clone(),
                })
            })
            .collect())
    }

    /// All observations as normalized scored points (for reference fronts).
    pub fn scored_points(&self) -> Result<Vec<ScoredPoint>> {
        let bounds = self.config.bounds()?;
        Ok(self.points_up_to(self.iteration, &bounds).0)
    }

    /// Metric series with IGD filled against `reference`.
    pub fn metrics_with_igd(&self, reference: &[ObjectiveVector]) -> Result<Vec<MetricRecord>> {
        let bounds = self.config.bounds()?;
        self.metrics
            .iter()
            .map(|m| {
                let (points, _) = self.points_up_to(m.iteration, &bounds);
                let igd = if points.is_empty() {
                    None
                } else {
                    let front = pareto::pareto_front(&points)?;
                    Some(pareto::igd(&front.objectives(), reference)?)
                };
                Ok(MetricRecord { igd, ..m.clone() })
            })
            .collect()
    }

    pub fn hypervolume_series(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.hypervolume).collect()
    }
}

fn check_viabilities(entries: &[(FormulationId, &Vec<f64>)]) -> Result<()> {
    let (lo, hi) = VIABILITY_RANGE;
    let mut offenders = Vec::new();
    for (id, values) in entries {
        if values.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "formulation {id} has no replicate values"
            )));
        }
        if values
            .iter()
            .any(|v| !(v.is_finite() && (lo..=hi).contains(v)))
        {
            offenders.push(id.to_string());
        }
    }
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(Error::ViabilityOutOfRange {
            offenders,
            min: lo,
            max: hi,
        })
    }
}

/// Protocol for oracle-driven campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Template; the id is suffixed per repeat and `iterations` is the budget.
    pub campaign: CampaignConfig,
    pub oracle: OracleSpec,
    pub repeats: usize,
    /// Random pool draw that the coverage-reduced initial set is taken from.
    pub initial_draw: usize,
    /// Size of the k-center initial set.
    pub initial_k: usize,
}

/// The k-center initial set shared by all methods for one repeat.
pub fn synthetic_initial_design(
    config: &SyntheticConfig,
    pool: &Pool,
    repeat: usize,
) -> Result<Vec<Measurement>> {
    let seed = repeat_seed(config.campaign.seed, repeat);
    let draw = config.initial_draw.min(pool.len());
    let mut drawn = acquisition::random_select(
        pool.len(),
        draw,
        derive_seed(seed, &[Role::InitialDesign as u64]),
    )?;
    drawn.sort_unstable();
    let candidates: Vec<Formulation> = drawn
        .iter()
        .map(|&i| pool.formulations()[i].clone())
        .collect();
    let picks = kcenter_select(&[], &candidates, config.initial_k.min(candidates.len()))?;
    picks
        .into_iter()
        .map(|p| {
            let f = candidates[p.index].clone();
            let r = config
                .oracle
                .observe(&f.concentrations(), derive_seed(seed, &[0, f.id().0]))?;
            Ok(Measurement {
                formulation: f,
                replicates: r.values,
                source: Source::Oracle,
            })
        })
        .collect()
}

fn repeat_seed(master: u64, repeat: usize) -> u64 {
    derive_seed(master, &[Role::Repeat as u64, repeat as u64])
}

/// Runs one repeat to completion with oracle-simulated results.
pub fn run_synthetic_repeat(
    config: &SyntheticConfig,
    pool: &Pool,
    repeat: usize,
) -> Result<Campaign> {
    config.oracle.validate()?;
    let initial = synthetic_initial_design(config, pool, repeat)?;
    let seed = repeat_seed(config.campaign.seed, repeat);
    let mut cc = config.campaign.clone();
    cc.id = format!("{}-r{repeat}", config.campaign.id);
    cc.seed = seed;
    let mut campaign = Campaign::create(cc, pool, initial)?;
    let key = campaign.config.key();
    while campaign.status == Status::ReadyToSuggest {
        let batch = campaign.suggest(pool)?;
        let iteration = campaign.iteration as u64 + 1;
        let results = batch
            .candidates
            .iter()
            .map(|c| {
                let f = &c.formulation;
                let r = config.oracle.observe(
                    &f.concentrations(),
                    derive_seed(seed, &[key, iteration, f.id().0]),
                )?;
                Ok(ResultEntry {
                    id: f.id(),
                    replicates: r.values,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        campaign.ingest(results, false, Source::Oracle)?;
    }
    Ok(campaign)
}

/// Per-iteration hypervolume across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// One hypervolume series per repeat.
    pub runs: Vec<Vec<f64>>,
}

impl TrajectoryStats {
    pub fn from_runs(runs: Vec<Vec<f64>>) -> Result<Self> {
        let len = runs
            .first()
            .map(Vec::len)
            .ok_or(Error::Empty("trajectories"))?;
        if runs.iter().any(|r| r.len() != len) {
            return Err(Error::InvalidConfig("trajectories differ in length".into()));
        }
        let column = |i: usize| runs.iter().map(|r| r[i]).collect::<Vec<_>>();
        Ok(Self {
            mean: (0..len).map(|i| stats::mean(&column(i))).collect(),
            sd: (0..len).map(|i| stats::sample_sd(&column(i))).collect(),
            runs,
        })
    }

    pub fn final_values(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.last().copied()).collect()
    }

    /// First iteration at which the mean trajectory reaches `level`.
    pub fn first_reaching(&self, level: f64) -> Option<usize> {
        self.mean.iter().position(|&m| m >= level)
    }
}

/// Runs every repeat sequentially.
pub fn run_synthetic_campaign(config: &SyntheticConfig, pool: &Pool) -> Result<TrajectoryStats> {
    let runs = (0..config.repeats)
        .map(|r| run_synthetic_repeat(config, pool, r).map(|c| c.hypervolume_series()))
        .collect::<Result<Vec<_>>>()?;
    TrajectoryStats::from_runs(runs)
}

mod hex_u64 {
    use alloc::format;
    use alloc::string::String;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
    }
}
