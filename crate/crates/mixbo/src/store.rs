//! Event-sourced campaign persistence.
//!
//! Each campaign lives in `<root>/<id>/` as an append-only `events.jsonl` log
//! and a `state.json` snapshot. The snapshot records how many events it
//! covers; a snapshot that lags the log is rebuilt by replay.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use mixbo_core::acquisition::BatchSuggestion;
use mixbo_core::campaign::{Campaign, CampaignConfig, Measurement, Pool, ResultEntry, Source};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const SCHEMA_VERSION: u32 = 1;

const STATE_FILE: &str = "state.json";
const EVENTS_FILE: &str = "events.jsonl";
const LOCK_FILE: &str = "lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        config: CampaignConfig,
        initial: Vec<Measurement>,
    },
    Suggested {
        suggestion: BatchSuggestion,
    },
    Ingested {
        results: Vec<ResultEntry>,
        allow_partial: bool,
        source: Source,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub schema: u32,
    pub seq: u64,
    /// Campaign version after the event was applied.
    pub version: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub schema: u32,
    /// Number of log events folded into `campaign`.
    pub events: u64,
    pub campaign: Campaign,
}

/// Holds the campaign lock file for the lifetime of a write.
struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    pools: Mutex<HashMap<String, Arc<Pool>>>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| AppError::io(&root, e))?;
        Ok(Self {
            root,
            pools: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn exists(&self, id: &str) -> bool {
        self.dir(id).join(STATE_FILE).is_file()
    }

    /// Campaign ids with a state file, sorted.
    pub fn ids(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let entries = fs::read_dir(&self.root).map_err(|e| AppError::io(&self.root, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| AppError::io(&self.root, e))?;
            if entry.path().join(STATE_FILE).is_file() {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    /// Enumerated pool for a campaign configuration, cached by space.
    pub fn pool(&self, config: &CampaignConfig) -> Result<Arc<Pool>> {
        let key =
            serde_json::to_string(&(&config.space, config.max_pool)).expect("space serializes");
        if let Some(p) = self.pools.lock().expect("pool cache").get(&key) {
            return Ok(p.clone());
        }
        let pool = Arc::new(Pool::enumerate(&config.space, config.max_pool)?);
        self.pools
            .lock()
            .expect("pool cache")
            .insert(key, pool.clone());
        Ok(pool)
    }

    fn lock(&self, id: &str) -> Result<LockGuard> {
        let path = self.dir(id).join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(AppError::Locked(id.to_string()))
            }
            Err(e) => Err(AppError::io(path, e)),
        }
    }

    pub fn create(&self, config: CampaignConfig, initial: Vec<Measurement>) -> Result<Campaign> {
        config.validate()?;
        let dir = self.dir(&config.id);
        if self.exists(&config.id) {
            return Err(AppError::Exists(config.id));
        }
        let pool = self.pool(&config)?;
        let campaign = Campaign::create(config.clone(), &pool, initial.clone())?;
        fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
        let _guard = self.lock(&config.id)?;
        let events = dir.join(EVENTS_FILE);
        if events.exists() {
            fs::remove_file(&events).map_err(|e| AppError::io(&events, e))?;
        }
        let id = config.id.clone();
        self.append(&id, 0, campaign.version, Event::Created { config, initial })?;
        self.write_state(&campaign, 1)?;
        Ok(campaign)
    }

    pub fn load(&self, id: &str) -> Result<Campaign> {
        let state = self.read_state(id)?;
        let logged = self.events(id)?.len() as u64;
        if state.events != logged {
            return self.replay(id);
        }
        Ok(state.campaign)
    }

    fn read_state(&self, id: &str) -> Result<StateFile> {
        let path = self.dir(id).join(STATE_FILE);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(AppError::NotFound(id.to_string()))
            }
            Err(e) => return Err(AppError::io(path, e)),
        };
        let state: StateFile = serde_json::from_slice(&bytes).map_err(|e| AppError::Corrupt {
            id: id.to_string(),
            message: format!("state file: {e}"),
        })?;
        if state.schema != SCHEMA_VERSION {
            return Err(AppError::Corrupt {
                id: id.to_string(),
                message: format!("state schema {} is not {SCHEMA_VERSION}", state.schema),
            });
        }
        Ok(state)
    }

    pub fn events(&self, id: &str) -> Result<Vec<EventRecord>> {
        let path = self.dir(id).join(EVENTS_FILE);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(AppError::NotFound(id.to_string()))
            }
            Err(e) => return Err(AppError::io(path, e)),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| AppError::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: EventRecord =
                serde_json::from_str(&line).map_err(|e| AppError::Corrupt {
                    id: id.to_string(),
                    message: format!("event line {}: {e}", i + 1),
                })?;
            if record.schema != SCHEMA_VERSION || record.seq != out.len() as u64 {
                return Err(AppError::Corrupt {
                    id: id.to_string(),
                    message: format!(
                        "event line {} has schema {} and seq {}",
                        i + 1,
                        record.schema,
                        record.seq
                    ),
                });
            }
            out.push(record);
        }
        Ok(out)
    }

    fn append(&self, id: &str, seq: u64, version: u64, event: Event) -> Result<()> {
        let path = self.dir(id).join(EVENTS_FILE);
        let record = EventRecord {
            schema: SCHEMA_VERSION,
            seq,
            version,
            event,
        };
        let mut line = serde_json::to_vec(&record).expect("event serializes");
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| AppError::io(&path, e))?;
        f.write_all(&line).map_err(|e| AppError::io(&path, e))?;
        f.sync_data().map_err(|e| AppError::io(&path, e))
    }

    fn write_state(&self, campaign: &Campaign, events: u64) -> Result<()> {
        let dir = self.dir(&campaign.config.id);
        let state = StateFile {
            schema: SCHEMA_VERSION,
            events,
            campaign: campaign.clone(),
        };
        let bytes = serde_json::to_vec_pretty(&state).expect("state serializes");
        write_atomic(&dir.join(STATE_FILE), &bytes)
    }

    /// Applies a mutation under the campaign lock, logging `event` and
    /// snapshotting the result. `expected` guards against stale writers.
    fn mutate<T>(
        &self,
        id: &str,
        expected: Option<u64>,
        f: impl FnOnce(&mut Campaign, &Pool) -> Result<(T, Event)>,
    ) -> Result<(Campaign, T)> {
        if !self.exists(id) {
            return Err(AppError::NotFound(id.to_string()));
        }
        let _guard = self.lock(id)?;
        let mut campaign = self.load(id)?;
        if let Some(v) = expected {
            if v != campaign.version {
                return Err(AppError::Stale {
                    given: v,
                    current: campaign.version,
                });
            }
        }
        let pool = self.pool(&campaign.config)?;
        let before = campaign.version;
        let (out, event) = f(&mut campaign, &pool)?;
        if campaign.version != before {
            let seq = self.events(id)?.len() as u64;
            self.append(id, seq, campaign.version, event)?;
            self.write_state(&campaign, seq + 1)?;
        }
        Ok((campaign, out))
    }

    /// Next batch; returns the stored batch unchanged while awaiting results.
    pub fn suggest(&self, id: &str, expected: Option<u64>) -> Result<(Campaign, BatchSuggestion)> {
        self.mutate(id, expected, |c, pool| {
            let s = c.suggest(pool)?;
            Ok((s.clone(), Event::Suggested { suggestion: s }))
        })
    }

    pub fn ingest(
        &self,
        id: &str,
        expected: Option<u64>,
        results: Vec<ResultEntry>,
        allow_partial: bool,
        source: Source,
    ) -> Result<Campaign> {
        self.mutate(id, expected, |c, _| {
            c.ingest(results.clone(), allow_partial, source)?;
            Ok((
                (),
                Event::Ingested {
                    results,
                    allow_partial,
                    source,
                },
            ))
        })
        .map(|(c, _)| c)
    }

    /// Rebuilds a campaign from its event log, checking that every logged
    /// suggestion is reproduced exactly.
    pub fn replay(&self, id: &str) -> Result<Campaign> {
        let events = self.events(id)?;
        let corrupt = |message: String| AppError::Corrupt {
            id: id.to_string(),
            message,
        };
        let mut iter = events.into_iter();
        let Some(EventRecord {
            event: Event::Created { config, initial },
            ..
        }) = iter.next()
        else {
            return Err(corrupt("log does not start with a created event".into()));
        };
        let pool = self.pool(&config)?;
        let mut campaign = Campaign::create(config, &pool, initial)?;
        for record in iter {
            match record.event {
                Event::Created { .. } => {
                    return Err(corrupt(format!(
                        "second created event at seq {}",
                        record.seq
                    )))
                }
                Event::Suggested { suggestion } => {
                    let again = campaign.suggest(&pool)?;
                    if again != suggestion {
                        return Err(corrupt(format!(
                            "suggestion at seq {} is not reproduced",
                            record.seq
                        )));
                    }
                }
                Event::Ingested {
                    results,
                    allow_partial,
                    source,
                } => {
                    campaign.ingest(results, allow_partial, source)?;
                }
            }
            if campaign.version != record.version {
                return Err(corrupt(format!(
                    "version {} after seq {} but the log says {}",
                    campaign.version, record.seq, record.version
                )));
            }
        }
        Ok(campaign)
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it over.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| AppError::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_data()
        .map_err(|e| AppError::io(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}
