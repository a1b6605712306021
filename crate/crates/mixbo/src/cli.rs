//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use mixbo_core::acquisition::Method;
use mixbo_core::bench::BenchConfig;
use mixbo_core::campaign::{CampaignConfig, Pool, Source, SyntheticConfig};
use mixbo_core::pareto::{reference_front, ScoredPoint};
use mixbo_core::space::{enumerate_pool, ComponentSet};
use serde_json::json;

use crate::error::{AppError, Result};
use crate::formats::{self, Format};
use crate::oracle_config;
use crate::runner;
use crate::store::Store;

/// Pool size reported elsewhere for the default cocktail space.
pub const REPORTED_COCKTAIL_COUNT: u64 = 48_198;

#[derive(Debug, Parser)]
#[command(
    name = "mixbo",
    version,
    about = "Batch multi-objective Bayesian optimization campaigns over mixture grids"
)]
pub struct Cli {
    /// Campaign store directory.
    #[arg(
        long,
        global = true,
        env = "MIXBO_STORE",
        default_value = "mixbo-store"
    )]
    pub store: PathBuf,
    /// Campaign id.
    #[arg(long, global = true)]
    pub campaign: Option<String>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
    /// Configuration file (campaign for init, component set for enumerate,
    /// oracle for bench).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Table,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Table => Format::Table,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchTarget {
    OneD,
    Rastrigin,
    Synthetic,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a campaign from --config and optional initial data.
    Init {
        /// CSV with component columns and replicate_1..n.
        #[arg(long)]
        initial: Option<PathBuf>,
    },
    /// Produce (or re-print) the pending batch sheet.
    Suggest {
        /// Write the batch sheet CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Empty replicate columns in the sheet.
        #[arg(long, default_value_t = 3)]
        replicates: usize,
        /// Reject the write unless the campaign is at this version.
        #[arg(long)]
        expect_version: Option<u64>,
    },
    /// Ingest a results CSV for the pending batch.
    Ingest {
        #[arg(long)]
        results: PathBuf,
        /// Accept results for part of the batch.
        #[arg(long)]
        partial: bool,
        #[arg(long)]
        expect_version: Option<u64>,
    },
    /// Hypervolume and IGD series.
    Metrics {
        /// Campaigns whose union front is the IGD reference ("all" for every
        /// campaign in the store). The campaign itself is always included.
        #[arg(long, num_args = 1..)]
        reference: Vec<String>,
    },
    /// Pareto-optimal observations with compositions.
    Front,
    /// Count and optionally write the candidate pool.
    Enumerate {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean and standard deviation trajectories across seeded repeats.
    Bench {
        #[arg(long, value_enum)]
        kind: BenchTarget,
        #[arg(long)]
        method: Option<String>,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Rebuild a campaign from its event log and compare with the snapshot.
    Replay,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

fn campaign_id(cli: &Cli) -> Result<&str> {
    cli.campaign
        .as_deref()
        .ok_or_else(|| AppError::Validation("--campaign is required".into()))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| AppError::io(path, e))
}

/// Parses a campaign configuration, naming the valid methods on a bad one.
pub fn parse_campaign_config(bytes: &[u8]) -> Result<CampaignConfig> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| AppError::Validation(format!("config: {e}")))?;
    let valid = || {
        Method::ALL
            .iter()
            .filter(|m| m.is_multi_objective())
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(", ")
    };
    if let Some(m) = value.pointer("/acquisition/method") {
        let name = m.as_str().unwrap_or_default();
        match name.parse::<Method>() {
            Ok(method) if method.is_multi_objective() => {}
            _ => {
                return Err(AppError::Validation(format!(
                    "unknown campaign method {m}; valid methods: {}",
                    valid()
                )))
            }
        }
    }
    let config: CampaignConfig =
        serde_json::from_value(value).map_err(|e| AppError::Validation(format!("config: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<String> {
    let format: Format = cli.format.into();
    match &cli.command {
        Command::Init { initial } => {
            let path = cli
                .config
                .as_deref()
                .ok_or_else(|| AppError::Validation("init needs --config".into()))?;
            let mut config = parse_campaign_config(&read_file(path)?)?;
            if let Some(id) = &cli.campaign {
                config.id = id.clone();
            }
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let measurements = match initial {
                Some(p) => {
                    formats::read_measurements(&read_file(p)?[..], &config.space, Source::Lab)?
                }
                None => Vec::new(),
            };
            let store = Store::open(&cli.store)?;
            let c = store.create(config, measurements)?;
            Ok(match format {
                Format::Json => formats::to_json(&json!({
                    "id": c.id(),
                    "version": c.version,
                    "metrics": c.metrics,
                })),
                _ => format!("{}\n", c.id()),
            })
        }
        Command::Suggest {
            out,
            replicates,
            expect_version,
        } => {
            let store = Store::open(&cli.store)?;
            let (c, batch) = store.suggest(campaign_id(cli)?, *expect_version)?;
            let mut sheet = Vec::new();
            formats::write_batch_sheet(&c.config.space, &batch, *replicates, &mut sheet)?;
            if let Some(p) = out {
                crate::store::write_atomic(p, &sheet)?;
            }
            Ok(match (format, out) {
                (Format::Json, _) => {
                    formats::to_json(&json!({ "version": c.version, "suggestion": batch }))
                }
                (_, Some(p)) => format!(
                    "{} candidates written to {}\n",
                    batch.candidates.len(),
                    p.display()
                ),
                _ => String::from_utf8(sheet).expect("utf-8 csv"),
            })
        }
        Command::Ingest {
            results,
            partial,
            expect_version,
        } => {
            let store = Store::open(&cli.store)?;
            let id = campaign_id(cli)?;
            let current = store.load(id)?;
            let entries = formats::read_results(&read_file(results)?[..], &current.config.space)?;
            let c = store.ingest(id, *expect_version, entries, *partial, Source::Lab)?;
            let m = c.metrics.last().expect("metrics exist");
            Ok(match format {
                Format::Json => formats::to_json(&json!({ "version": c.version, "metric": m })),
                _ => format!(
                    "iteration {} hypervolume {} status {}\n",
                    m.iteration,
                    m.hypervolume,
                    c.status.name()
                ),
            })
        }
        Command::Metrics { reference } => {
            let store = Store::open(&cli.store)?;
            let c = store.load(campaign_id(cli)?)?;
            let metrics = if reference.is_empty() {
                c.metrics.clone()
            } else {
                let ids = if reference.iter().any(|r| r == "all") {
                    store.ids()?
                } else {
                    reference.clone()
                };
                let mut sets: Vec<Vec<ScoredPoint>> = vec![c.scored_points()?];
                for id in ids.iter().filter(|id| id.as_str() != c.id()) {
                    sets.push(store.load(id)?.scored_points()?);
                }
                let refs: Vec<&[ScoredPoint]> = sets.iter().map(Vec::as_slice).collect();
                let front = reference_front(&refs)?;
                c.metrics_with_igd(&front.objectives())?
            };
            Ok(match format {
                Format::Json => formats::to_json(&metrics),
                _ => {
                    let (h, rows) = formats::metric_rows(&metrics);
                    formats::render_rows(&h, &rows, format)
                }
            })
        }
        Command::Front => {
            let store = Store::open(&cli.store)?;
            let c = store.load(campaign_id(cli)?)?;
            let front = c.front()?;
            Ok(match format {
                Format::Json => formats::to_json(&front),
                _ => {
                    let (h, rows) = formats::front_rows(&c.config.space, &front);
                    let h: Vec<&str> = h.iter().map(String::as_str).collect();
                    formats::render_rows(&h, &rows, format)
                }
            })
        }
        Command::Enumerate { out } => {
            let space: ComponentSet = match &cli.config {
                Some(p) => serde_json::from_slice(&read_file(p)?)
                    .map_err(|e| AppError::Validation(format!("component set: {e}")))?,
                None => ComponentSet::default(),
            };
            let count = space.pool_size()?;
            if let Some(p) = out {
                let pool = enumerate_pool(&space, usize::MAX)?;
                let mut bytes = Vec::new();
                formats::write_pool(&space, &pool, &mut bytes)?;
                crate::store::write_atomic(p, &bytes)?;
            }
            let note = (space == ComponentSet::cpa_cocktails()).then(|| {
                format!(
                    "a count of {REPORTED_COCKTAIL_COUNT} has been reported for this space; exact enumeration of its constraints gives {count}"
                )
            });
            Ok(match format {
                Format::Json => formats::to_json(&json!({ "count": count as u64, "note": note })),
                _ => {
                    let mut s = format!("{count} formulations\n");
                    if let Some(n) = note {
                        s.push_str(&format!("note: {n}\n"));
                    }
                    s
                }
            })
        }
        Command::Bench {
            kind,
            method,
            repeats,
            iterations,
            batch_size,
            mc_samples,
            restarts,
            threads,
        } => {
            let method: Option<Method> = method
                .as_deref()
                .map(|m| m.parse())
                .transpose()
                .map_err(|e: mixbo_core::Error| AppError::Validation(e.to_string()))?;
            let run = || -> Result<runner::Timed<mixbo_core::campaign::TrajectoryStats>> {
                match kind {
                    BenchTarget::OneD | BenchTarget::Rastrigin => {
                        let mut config = match kind {
                            BenchTarget::OneD => BenchConfig::one_d(),
                            _ => BenchConfig::rastrigin(),
                        };
                        config.method = method.unwrap_or(config.method);
                        config.iterations = iterations.unwrap_or(config.iterations);
                        config.batch_size = batch_size.unwrap_or(config.batch_size);
                        config.mc_samples = mc_samples.unwrap_or(config.mc_samples);
                        config.restarts = restarts.unwrap_or(config.restarts);
                        config.seed = cli.seed.unwrap_or(config.seed);
                        runner::bench(&config, *repeats)
                    }
                    BenchTarget::Synthetic => {
                        let config = synthetic_config(
                            method.unwrap_or(Method::Qlognehvi),
                            *repeats,
                            iterations.unwrap_or(20),
                            cli.seed.unwrap_or(0),
                            cli.config.as_deref(),
                        )?;
                        let config = SyntheticConfig {
                            campaign: CampaignConfig {
                                acquisition: mixbo_core::acquisition::AcquisitionConfig {
                                    batch_size: batch_size
                                        .unwrap_or(config.campaign.acquisition.batch_size),
                                    mc_samples: mc_samples
                                        .unwrap_or(config.campaign.acquisition.mc_samples),
                                    ..config.campaign.acquisition.clone()
                                },
                                model: mixbo_core::campaign::ModelOptions {
                                    restarts: restarts.unwrap_or(config.campaign.model.restarts),
                                    ..config.campaign.model.clone()
                                },
                                ..config.campaign.clone()
                            },
                            ..config
                        };
                        let pool =
                            Pool::enumerate(&config.campaign.space, config.campaign.max_pool)?;
                        runner::synthetic(&config, &pool)
                    }
                }
            };
            let result = match threads {
                Some(t) => runner::with_threads(*t, run)?,
                None => run()?,
            };
            let stats = &result.value;
            Ok(match format {
                Format::Json => formats::to_json(&json!({
                    "mean": stats.mean,
                    "sd": stats.sd,
                    "runs": stats.runs,
                    "seconds": result.seconds,
                })),
                _ => {
                    let rows: Vec<Vec<String>> = stats
                        .mean
                        .iter()
                        .zip(&stats.sd)
                        .enumerate()
                        .map(|(i, (m, s))| {
                            vec![i.to_string(), format!("{m:.6}"), format!("{s:.6}")]
                        })
                        .collect();
                    formats::render_rows(&["iteration", "mean", "sd"], &rows, format)
                }
            })
        }
        Command::Replay => {
            let store = Store::open(&cli.store)?;
            let id = campaign_id(cli)?;
            let rebuilt = store.replay(id)?;
            let stored = store.load(id)?;
            if rebuilt != stored {
                return Err(AppError::Corrupt {
                    id: id.to_string(),
                    message: "replayed state differs from the snapshot".into(),
                });
            }
            Ok(format!(
                "{id}: {} events replayed, version {}\n",
                store.events(id)?.len(),
                rebuilt.version
            ))
        }
        Command::Serve { addr } => {
            let store = Store::open(&cli.store)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::io("<runtime>", e))?;
            rt.block_on(crate::service::serve(store, addr))?;
            Ok(String::new())
        }
    }
}

/// Monte Carlo samples per acquisition in synthetic benchmarks.
pub const SYNTHETIC_MC_SAMPLES: usize = 256;
/// Hyperparameter restarts per fit in synthetic benchmarks.
pub const SYNTHETIC_RESTARTS: usize = 2;

/// Synthetic protocol: k = 10 k-center initial set from a 535-sample draw,
/// q = 10, with the shipped (or configured) toxicity oracle.
pub fn synthetic_config(
    method: Method,
    repeats: usize,
    iterations: usize,
    seed: u64,
    oracle: Option<&Path>,
) -> Result<SyntheticConfig> {
    let mut campaign = CampaignConfig::new(format!("synthetic-{}", method.name()), method);
    campaign.iterations = iterations;
    campaign.seed = seed;
    campaign.acquisition.mc_samples = SYNTHETIC_MC_SAMPLES;
    campaign.model.restarts = SYNTHETIC_RESTARTS;
    Ok(SyntheticConfig {
        campaign,
        oracle: oracle_config::load_oracle(oracle)?.spec,
        repeats,
        initial_draw: 535,
        initial_k: 10,
    })
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match run(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_class() as i32
        }
    }
}
