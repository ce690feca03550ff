//! Newline-delimited event log.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::controllers::{EpisodeRecord, LearnerEvent};
use crate::error::LogError;
use crate::learner::{Assessment, LearnerProfile};
use crate::model::{AttemptOutcome, GameKind, SarAct};
use crate::rl::RlParams;

pub const LOG_SCHEMA: &str = "hhrl.events/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Robot,
    Learner,
    System,
}

/// First record of every log: what is needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub seed: u64,
    pub catalog: Vec<GameKind>,
    pub mistake_threshold: u32,
    pub loc_params: RlParams,
    pub lof_params: RlParams,
    /// Simulated learner at the start of the run; absent for live runs.
    pub learner: Option<LearnerProfile>,
    pub assessment: Option<Assessment>,
}

/// A resolved game attempt, with the learner's state when it was played.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub game: usize,
    pub loc: u8,
    pub mistakes: u32,
    pub help_requests: u32,
    pub outcome: AttemptOutcome,
    /// Proficiency on this game while the attempt was played.
    pub proficiency: Option<f64>,
    /// Best challenge level for that proficiency.
    pub target_loc: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    Header(LogHeader),
    SessionStart,
    Act(SarAct),
    Learner(LearnerEvent),
    Episode(EpisodeRecord),
    Attempt(AttemptRecord),
    SessionEnd { early: bool },
    ProtocolError { message: String },
    InterventionEnd {
        assessment: Option<Assessment>,
        proficiency: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub session: u32,
    /// Simulation ticks (one per learner event) or unix milliseconds for live runs.
    pub time: u64,
    pub actor: Actor,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event records serialize")
    }
}

/// Appends records with consecutive sequence numbers, optionally mirroring
/// every line to a writer as it is produced.
pub struct EventLog<W: Write> {
    records: Vec<EventRecord>,
    next_seq: u64,
    sink: Option<W>,
}

impl<W: Write> EventLog<W> {
    pub fn new(sink: Option<W>) -> Self {
        Self { records: Vec::new(), next_seq: 0, sink }
    }

    /// Continues an existing log.
    pub fn resume(records: Vec<EventRecord>, sink: Option<W>) -> Self {
        let next_seq = records.last().map_or(0, |r| r.seq + 1);
        Self { records, next_seq, sink }
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn push(
        &mut self,
        session: u32,
        time: u64,
        actor: Actor,
        payload: EventPayload,
    ) -> std::io::Result<&EventRecord> {
        let record = EventRecord { seq: self.next_seq, session, time, actor, payload };
        if let Some(sink) = self.sink.as_mut() {
            let mut line = record.to_line();
            line.push('\n');
            sink.write_all(line.as_bytes())?;
        }
        self.next_seq += 1;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        match self.sink.as_mut() {
            Some(sink) => sink.flush(),
            None => Ok(()),
        }
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EventRecord> {
        self.records
    }
}

pub fn write_records<W: Write>(records: &[EventRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_line())?;
    }
    out.flush()
}

pub fn to_ndjson(records: &[EventRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

/// Parses a log. Blank lines are skipped. Sequence numbers are not checked
/// here; see [`check_sequence`].
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<EventRecord>, LogError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| LogError::Parse { line: i + 1, source })?;
        out.push(record);
    }
    Ok(out)
}

/// Sequence numbers must run 0, 1, 2, ... with no gaps or repeats.
pub fn check_sequence(records: &[EventRecord]) -> Result<(), LogError> {
    for (expected, r) in (0u64..).zip(records) {
        if r.seq > expected {
            return Err(LogError::Gap { missing: expected });
        }
        if r.seq < expected {
            return Err(LogError::Inconsistent {
                seq: r.seq,
                reason: format!("sequence number out of order, expected {expected}"),
            });
        }
    }
    Ok(())
}
