//! Simulated interventions: many sessions against one simulated learner,
//! with a replayable event log and convergence metrics.

pub mod log;
pub mod metrics;
pub mod report;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::InterventionConfig;
use crate::controllers::{LearnerEvent, LearnerEventKind, MetaController, StepOutcome};
use crate::error::{ConfigError, Error, LogError};
use crate::learner::{assess, exact_optimal_loc, LearnerProfile};
use crate::model::SessionPhase;
use crate::rl::{q_update, QTable, TableId};

pub use log::{Actor, AttemptRecord, EventLog, EventPayload, EventRecord, LogHeader, LOG_SCHEMA};
pub use metrics::{convergence_report, engagement_proxy, ConvergenceReport, TableReport, WINDOW};

/// Stream ids carved out of the run seed.
const ENGINE_STREAM: u64 = 0;
const LEARNER_STREAM: u64 = 1;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub struct InterventionRun {
    pub records: Vec<EventRecord>,
    pub loc_table: QTable,
    pub lof_table: QTable,
    pub report: ConvergenceReport,
    /// The learner after all sessions (differs from the start only if it grows).
    pub learner: LearnerProfile,
}

pub(crate) fn log_outcome<W: Write>(
    log: &mut EventLog<W>,
    session: u32,
    time: u64,
    outcome: &StepOutcome,
    learner: Option<&mut LearnerProfile>,
    threshold: u32,
) -> std::io::Result<()> {
    for e in &outcome.episodes {
        log.push(session, time, Actor::System, EventPayload::Episode(e.clone()))?;
    }
    let mut learner = learner;
    for attempt in &outcome.resolved {
        let (proficiency, target) = match learner.as_deref() {
            Some(l) => (
                Some(l.proficiency[attempt.game.id]),
                Some(exact_optimal_loc(l, attempt.game.id, threshold).value()),
            ),
            None => (None, None),
        };
        let record = AttemptRecord {
            game: attempt.game.id,
            loc: attempt.loc.value(),
            mistakes: attempt.mistakes,
            help_requests: attempt.help_requests,
            outcome: attempt.outcome,
            proficiency,
            target_loc: target,
        };
        log.push(session, time, Actor::System, EventPayload::Attempt(record))?;
        if let Some(l) = learner.as_deref_mut() {
            l.grow(attempt).expect("resolved attempt");
        }
    }
    for act in &outcome.acts {
        log.push(session, time, Actor::Robot, EventPayload::Act(act.clone()))?;
    }
    Ok(())
}

/// Runs `config.sessions` complete sessions against the configured simulated
/// learner. With a sink, every record is written as it is produced, so an
/// I/O failure leaves the log complete up to the failing record.
pub fn run_intervention(
    config: &InterventionConfig,
    sink: Option<&mut dyn Write>,
) -> Result<InterventionRun, Error> {
    config.validate()?;
    let mut learner = config.learner_profile()?.ok_or_else(|| {
        ConfigError::invalid("learner", "a simulated run needs a simulated learner, not \"live\"")
    })?;
    let engine = &config.engine;
    let threshold = engine.mistake_threshold;
    let mut engine_rng = seeded_rng(config.seed, ENGINE_STREAM);
    let mut learner_rng = seeded_rng(config.seed, LEARNER_STREAM);
    let mut mc = MetaController::new(engine.clone());
    let mut log = EventLog::new(sink);
    let mut time = 0u64;

    let header = LogHeader {
        schema: LOG_SCHEMA.into(),
        seed: config.seed,
        catalog: engine.catalog.clone(),
        mistake_threshold: threshold,
        loc_params: engine.loc,
        lof_params: engine.lof,
        learner: Some(learner.clone()),
        assessment: Some(assess(&learner, &engine.catalog)),
    };
    log.push(0, time, Actor::System, EventPayload::Header(header))?;

    for session in 1..=config.sessions {
        mc.reset_for_next_session()?;
        log.push(session, time, Actor::System, EventPayload::SessionStart)?;
        let mut kind = LearnerEventKind::SessionStart;
        loop {
            let event = LearnerEvent::new(kind, time);
            log.push(session, time, Actor::Learner, EventPayload::Learner(event.clone()))?;
            let outcome = mc.step(&event, &mut engine_rng)?;
            log_outcome(&mut log, session, time, &outcome, Some(&mut learner), threshold)?;
            time += 1;
            kind = match mc.phase() {
                SessionPhase::GameLoop => {
                    let attempt = mc.active_attempt().expect("game loop has an active game");
                    learner.respond(&attempt.game, attempt.loc, mc.last_feedback(), &mut learner_rng)
                }
                SessionPhase::ClosingInquiry => LearnerEventKind::InquiryResponse,
                SessionPhase::Ended => break,
                phase => unreachable!("step never pauses in {phase:?}"),
            };
        }
        log.push(session, time, Actor::System, EventPayload::SessionEnd { early: false })?;
    }
    log.push(
        config.sessions,
        time,
        Actor::System,
        EventPayload::InterventionEnd {
            assessment: Some(assess(&learner, &engine.catalog)),
            proficiency: Some(learner.proficiency.clone()),
        },
    )?;
    log.flush()?;

    let records = log.into_records();
    let report = convergence_report(&records);
    Ok(InterventionRun {
        loc_table: mc.loc_table().clone(),
        lof_table: mc.lof_table().clone(),
        records,
        report,
        learner,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub loc_table: QTable,
    pub lof_table: QTable,
    pub report: ConvergenceReport,
}

/// Rebuilds both tables from the episode records of a log, checking every
/// logged old/new value against the recomputed update.
pub fn replay(records: &[EventRecord]) -> Result<Replay, LogError> {
    log::check_sequence(records)?;
    let report = convergence_report(records);
    let Some(header) = metrics::header(records) else {
        let games = crate::model::default_game_catalog().len();
        let loc = crate::rl::RlParams::challenge_defaults();
        let lof = crate::rl::RlParams::feedback_defaults();
        if let Some(r) = records.iter().find(|r| matches!(r.payload, EventPayload::Episode(_))) {
            return Err(LogError::Inconsistent { seq: r.seq, reason: "episode before log header".into() });
        }
        return Ok(Replay {
            loc_table: QTable::for_table(TableId::Loc, games, loc.q_init),
            lof_table: QTable::for_table(TableId::Lof, games, lof.q_init),
            report,
        });
    };
    let games = header.catalog.len();
    let mut loc = QTable::for_table(TableId::Loc, games, header.loc_params.q_init);
    let mut lof = QTable::for_table(TableId::Lof, games, header.lof_params.q_init);
    for r in records {
        let EventPayload::Episode(e) = &r.payload else { continue };
        let (table, params) = match e.table {
            TableId::Loc => (&mut loc, &header.loc_params),
            TableId::Lof => (&mut lof, &header.lof_params),
        };
        let in_range = e.state < table.states()
            && e.action < table.actions()
            && e.next_state.is_none_or(|s| s < table.states());
        if !in_range {
            return Err(LogError::Inconsistent { seq: r.seq, reason: "cell outside the table".into() });
        }
        let update = q_update(table, e.state, e.action, e.reward, e.next_state, params)
            .map_err(|v| LogError::Inconsistent { seq: r.seq, reason: v.0 })?;
        if update.old.to_bits() != e.old_value.to_bits() || update.new.to_bits() != e.new_value.to_bits() {
            return Err(LogError::Inconsistent {
                seq: r.seq,
                reason: format!(
                    "logged update {} -> {} but replay gives {} -> {}",
                    e.old_value, e.new_value, update.old, update.new
                ),
            });
        }
    }
    Ok(Replay { loc_table: loc, lof_table: lof, report })
}
