//! Live sessions for human learners.
//!
//! [`SessionManager`] is the synchronous core: interventions, their persisted
//! logs and the single active session per intervention. [`http`] exposes it
//! over HTTP and a websocket.

pub mod http;

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::config::{ConfigFile, EngineConfig, InterventionConfig};
use crate::controllers::{LearnerEvent, LearnerEventKind, MetaController};
use crate::error::{ConfigError, LogError, ProtocolError};
use crate::model::{SarAct, SessionPhase};
use crate::rl::QTable;
use crate::runner::log::{read_records, EventLog};
use crate::runner::{convergence_report, log_outcome, replay, seeded_rng, Actor, ConvergenceReport, EventPayload, LogHeader, LOG_SCHEMA};

pub const API_SCHEMA: &str = "hhrl.api/1";
pub const DEFAULT_SESSION_TIMEOUT: Duration = Duration::from_secs(15 * 60);

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0} not found")]
    NotFound(String),
    #[error("intervention {0} already has an active session")]
    Conflict(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("persistence failure: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Current view of a session, as returned by the API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub schema: String,
    pub session_id: String,
    pub intervention_id: String,
    pub session_index: u32,
    pub active: bool,
    pub phase: SessionPhase,
    pub game: Option<GameState>,
    pub games_remaining: usize,
    /// Sequence number of the last persisted record.
    pub last_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub game_id: usize,
    pub game_name: String,
    pub loc: u8,
    pub mistakes: u32,
    pub help_requests: u32,
}

/// Server-to-client push on the event channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Push {
    Acts { session_id: String, seq: u64, acts: Vec<SarAct> },
    SessionEnded { session_id: String, seq: u64, early: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartedSession {
    pub session_id: String,
    pub acts: Vec<SarAct>,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReply {
    pub acts: Vec<SarAct>,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionInfo {
    pub schema: String,
    pub intervention_id: String,
    pub sessions_started: u32,
    pub active_session: Option<String>,
    pub loc_table: QTable,
    pub lof_table: QTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredConfig {
    seed: u64,
    engine: EngineConfig,
}

struct ActiveSession {
    id: String,
    index: u32,
    last_activity: Instant,
}

struct Intervention {
    id: String,
    mc: MetaController,
    log: EventLog<File>,
    rng: ChaCha8Rng,
    active: Option<ActiveSession>,
    session_index: u32,
    pushes: broadcast::Sender<Push>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Intervention {
    fn state(&self, session_id: &str, index: u32) -> SessionState {
        let live = self.active.as_ref().filter(|a| a.id == session_id);
        let phase = if live.is_some() { self.mc.phase() } else { SessionPhase::Ended };
        SessionState {
            schema: API_SCHEMA.into(),
            session_id: session_id.to_string(),
            intervention_id: self.id.clone(),
            session_index: index,
            active: live.is_some(),
            phase,
            game: live.and_then(|_| self.mc.active_attempt()).map(|a| GameState {
                game_id: a.game.id,
                game_name: a.game.name.clone(),
                loc: a.loc.value(),
                mistakes: a.mistakes,
                help_requests: a.help_requests,
            }),
            games_remaining: if live.is_some() { self.mc.games_remaining() } else { 0 },
            last_seq: self.log.next_seq().checked_sub(1),
        }
    }

    fn last_seq(&self) -> u64 {
        self.log.next_seq().saturating_sub(1)
    }

    fn push(&self, msg: Push) {
        // nobody listening is fine
        let _ = self.pushes.send(msg);
    }

    fn end_active(&mut self, early: bool) -> Result<Option<String>, ServiceError> {
        let Some(active) = self.active.take() else { return Ok(None) };
        if early {
            let t = self.mc.terminate_early();
            for e in t.episodes {
                self.log.push(active.index, now_ms(), Actor::System, EventPayload::Episode(e))?;
            }
        }
        self.log.push(active.index, now_ms(), Actor::System, EventPayload::SessionEnd { early })?;
        self.log.flush()?;
        self.push(Push::SessionEnded { session_id: active.id.clone(), seq: self.last_seq(), early });
        Ok(Some(active.id))
    }
}

#[derive(Default)]
struct Registry {
    interventions: HashMap<String, Arc<Mutex<Intervention>>>,
    /// Session id to (intervention id, session index).
    sessions: HashMap<String, (String, u32)>,
}

/// Owns every intervention. Cheap to clone; clones share state.
#[derive(Clone)]
pub struct SessionManager {
    data_dir: PathBuf,
    timeout: Duration,
    registry: Arc<Mutex<Registry>>,
}

fn token() -> String {
    let mut rng = rand::thread_rng();
    format!("{:016x}{:016x}", rng.gen::<u64>(), rng.gen::<u64>())
}

impl SessionManager {
    /// Opens (or creates) a data directory and restores every intervention
    /// found there. A session that was running when the service stopped is
    /// closed as terminated early.
    pub fn open(data_dir: impl Into<PathBuf>, timeout: Duration) -> Result<Self, ServiceError> {
        let data_dir = data_dir.into();
        fs::create_dir_all(&data_dir)?;
        let manager = Self { data_dir, timeout, registry: Arc::default() };
        let mut entries: Vec<PathBuf> = fs::read_dir(&manager.data_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("config.json").is_file())
            .collect();
        entries.sort();
        for dir in entries {
            let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            let intervention = manager.restore(&id, &dir)?;
            manager.registry.lock().unwrap().interventions.insert(id, Arc::new(Mutex::new(intervention)));
        }
        Ok(manager)
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn session_timeout(&self) -> Duration {
        self.timeout
    }

    fn restore(&self, id: &str, dir: &Path) -> Result<Intervention, ServiceError> {
        let stored: StoredConfig = serde_json::from_reader(BufReader::new(File::open(dir.join("config.json"))?))
            .map_err(|e| ConfigError::invalid("config.json", e.to_string()))?;
        let log_path = dir.join("events.ndjson");
        let records = read_records(BufReader::new(File::open(&log_path)?))?;
        let tables = replay(&records)?;
        let session_index = records.iter().map(|r| r.session).max().unwrap_or(0);
        let dangling = records.iter().rev().find_map(|r| match r.payload {
            EventPayload::SessionStart => Some(true),
            EventPayload::SessionEnd { .. } => Some(false),
            _ => None,
        });
        let file = OpenOptions::new().append(true).open(&log_path)?;
        let mut log = EventLog::resume(records, Some(file));
        if dangling == Some(true) {
            log.push(session_index, now_ms(), Actor::System, EventPayload::SessionEnd { early: true })?;
            log.flush()?;
        }
        let mc = MetaController::with_tables(stored.engine, tables.loc_table, tables.lof_table);
        Ok(Intervention {
            id: id.to_string(),
            mc,
            rng: seeded_rng(stored.seed, log.next_seq()),
            log,
            active: None,
            session_index,
            pushes: broadcast::channel(64).0,
        })
    }

    /// Creates an intervention from config-file keys (the same keys as a
    /// TOML config, as JSON). Simulation-only keys are accepted and ignored.
    pub fn create_intervention(&self, file: ConfigFile) -> Result<String, ServiceError> {
        let seed = file.seed.unwrap_or_else(rand::random);
        let mut file = file;
        file.learner = Some("live".into());
        let config = InterventionConfig::from_file(file, None)?;
        let id = token();
        let dir = self.data_dir.join(&id);
        fs::create_dir_all(&dir)?;
        let stored = StoredConfig { seed, engine: config.engine.clone() };
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(&stored).expect("config serializes"))?;
        let file = OpenOptions::new().create(true).append(true).open(dir.join("events.ndjson"))?;
        let mut log = EventLog::new(Some(file));
        let engine = config.engine;
        log.push(
            0,
            now_ms(),
            Actor::System,
            EventPayload::Header(LogHeader {
                schema: LOG_SCHEMA.into(),
                seed,
                catalog: engine.catalog.clone(),
                mistake_threshold: engine.mistake_threshold,
                loc_params: engine.loc,
                lof_params: engine.lof,
                learner: None,
                assessment: None,
            }),
        )?;
        log.flush()?;
        let intervention = Intervention {
            id: id.clone(),
            mc: MetaController::new(engine),
            rng: seeded_rng(seed, 0),
            log,
            active: None,
            session_index: 0,
            pushes: broadcast::channel(64).0,
        };
        self.registry.lock().unwrap().interventions.insert(id.clone(), Arc::new(Mutex::new(intervention)));
        Ok(id)
    }

    fn intervention(&self, id: &str) -> Result<Arc<Mutex<Intervention>>, ServiceError> {
        self.registry
            .lock()
            .unwrap()
            .interventions
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("intervention {id}")))
    }

    fn session(&self, sid: &str) -> Result<(Arc<Mutex<Intervention>>, u32), ServiceError> {
        let (iid, index) = self
            .registry
            .lock()
            .unwrap()
            .sessions
            .get(sid)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {sid}")))?;
        Ok((self.intervention(&iid)?, index))
    }

    pub fn intervention_info(&self, id: &str) -> Result<InterventionInfo, ServiceError> {
        let arc = self.intervention(id)?;
        let iv = arc.lock().unwrap();
        Ok(InterventionInfo {
            schema: API_SCHEMA.into(),
            intervention_id: iv.id.clone(),
            sessions_started: iv.session_index,
            active_session: iv.active.as_ref().map(|a| a.id.clone()),
            loc_table: iv.mc.loc_table().clone(),
            lof_table: iv.mc.lof_table().clone(),
        })
    }

    pub fn start_session(&self, intervention_id: &str) -> Result<StartedSession, ServiceError> {
        let arc = self.intervention(intervention_id)?;
        let mut iv = arc.lock().unwrap();
        if iv.active.is_some() {
            return Err(ServiceError::Conflict(intervention_id.to_string()));
        }
        iv.mc.reset_for_next_session().map_err(|v| ServiceError::Conflict(v.0))?;
        let index = iv.session_index + 1;
        let sid = token();
        let event = LearnerEvent::new(LearnerEventKind::SessionStart, now_ms());
        let iv = &mut *iv;
        let outcome = iv.mc.step(&event, &mut iv.rng)?;
        iv.session_index = index;
        iv.log.push(index, event.timestamp, Actor::System, EventPayload::SessionStart)?;
        iv.log.push(index, event.timestamp, Actor::Learner, EventPayload::Learner(event))?;
        let threshold = iv.mc.config().mistake_threshold;
        log_outcome(&mut iv.log, index, now_ms(), &outcome, None, threshold)?;
        iv.log.flush()?;
        iv.active = Some(ActiveSession { id: sid.clone(), index, last_activity: Instant::now() });
        self.registry.lock().unwrap().sessions.insert(sid.clone(), (intervention_id.to_string(), index));
        iv.push(Push::Acts { session_id: sid.clone(), seq: iv.last_seq(), acts: outcome.acts.clone() });
        Ok(StartedSession { state: iv.state(&sid, index), session_id: sid, acts: outcome.acts })
    }

    /// Routes one learner event. Everything the step produced is on disk
    /// before the acts are returned or pushed.
    pub fn submit_event(&self, sid: &str, event: LearnerEvent) -> Result<EventReply, ServiceError> {
        let (arc, index) = self.session(sid)?;
        let mut guard = arc.lock().unwrap();
        let iv = &mut *guard;
        let is_live = iv.active.as_ref().is_some_and(|a| a.id == sid);
        if !is_live || event.kind == LearnerEventKind::SessionStart {
            let phase = if is_live { iv.mc.phase() } else { SessionPhase::Ended };
            return Err(ProtocolError { phase, event: format!("{:?}", event.kind) }.into());
        }
        let mut event = event;
        if event.timestamp == 0 {
            event.timestamp = now_ms();
        }
        let outcome = match iv.mc.step(&event, &mut iv.rng) {
            Ok(o) => o,
            Err(e) => {
                iv.log.push(index, now_ms(), Actor::System, EventPayload::ProtocolError { message: e.to_string() })?;
                iv.log.flush()?;
                return Err(e.into());
            }
        };
        iv.log.push(index, event.timestamp, Actor::Learner, EventPayload::Learner(event))?;
        let threshold = iv.mc.config().mistake_threshold;
        log_outcome(&mut iv.log, index, now_ms(), &outcome, None, threshold)?;
        iv.log.flush()?;
        if let Some(a) = iv.active.as_mut() {
            a.last_activity = Instant::now();
        }
        if !outcome.acts.is_empty() {
            iv.push(Push::Acts { session_id: sid.to_string(), seq: iv.last_seq(), acts: outcome.acts.clone() });
        }
        if iv.mc.phase() == SessionPhase::Ended {
            iv.end_active(false)?;
        }
        Ok(EventReply { acts: outcome.acts, state: iv.state(sid, index) })
    }

    pub fn session_state(&self, sid: &str) -> Result<SessionState, ServiceError> {
        let (arc, index) = self.session(sid)?;
        let iv = arc.lock().unwrap();
        Ok(iv.state(sid, index))
    }

    /// Operator end: closes the session under the early-termination rule.
    pub fn end_session(&self, sid: &str) -> Result<SessionState, ServiceError> {
        let (arc, index) = self.session(sid)?;
        let mut iv = arc.lock().unwrap();
        if iv.active.as_ref().is_some_and(|a| a.id == sid) {
            iv.end_active(true)?;
        }
        Ok(iv.state(sid, index))
    }

    pub fn report(&self, intervention_id: &str) -> Result<ConvergenceReport, ServiceError> {
        let arc = self.intervention(intervention_id)?;
        let iv = arc.lock().unwrap();
        Ok(convergence_report(iv.log.records()))
    }

    /// Closes sessions idle for longer than the timeout. Returns their ids.
    pub fn reap_idle(&self) -> Result<Vec<String>, ServiceError> {
        let all: Vec<_> = self.registry.lock().unwrap().interventions.values().cloned().collect();
        let mut closed = Vec::new();
        for arc in all {
            let mut iv = arc.lock().unwrap();
            let idle = iv.active.as_ref().is_some_and(|a| a.last_activity.elapsed() >= self.timeout);
            if idle {
                closed.extend(iv.end_active(true)?);
            }
        }
        Ok(closed)
    }

    /// Subscribes to pushes for the intervention owning `sid`.
    pub fn subscribe(&self, sid: &str) -> Result<broadcast::Receiver<Push>, ServiceError> {
        let (arc, _) = self.session(sid)?;
        let iv = arc.lock().unwrap();
        Ok(iv.pushes.subscribe())
    }

    /// Flushes every log. Records are flushed as they are written, so this
    /// only matters for buffered platforms.
    pub fn flush_all(&self) -> Result<(), ServiceError> {
        let all: Vec<_> = self.registry.lock().unwrap().interventions.values().cloned().collect();
        for arc in all {
            arc.lock().unwrap().log.flush()?;
        }
        Ok(())
    }
}
