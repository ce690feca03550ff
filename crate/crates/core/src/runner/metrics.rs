//! Convergence metrics computed from an event log.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::learner::{oracle_policy, Assessment, LearnerProfile, DEFAULT_ORACLE_TRIALS};
use crate::model::{default_game_catalog, AttemptOutcome, GameKind, LOC_LEVELS};
use crate::rl::{greedy_policy, normalize_lof_reward, QTable, TableId};

use super::log::{AttemptRecord, EventPayload, EventRecord, LogHeader};

/// Episodes per window for windowed means and policy-change counts.
pub const WINDOW: usize = 25;

/// Seed of the oracle runs behind report agreement figures.
pub const ORACLE_SEED: u64 = 0x5eed;

pub const STABILITY_DEFINITION: &str = "episodes_to_stability is the start of the first 25-episode window \
from which every window, including the last, has at most one greedy-policy cell change";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub table: TableId,
    pub episodes: usize,
    pub rewards: Vec<f64>,
    /// Mean of all rewards up to and including each episode.
    pub running_mean: Vec<f64>,
    /// Mean of the last (up to) 25 rewards at each episode.
    pub windowed_mean: Vec<f64>,
    /// Rewards mapped to `[0, 1]`; feedback table only.
    pub normalized_running_mean: Option<Vec<f64>>,
    /// Greedy-policy cell changes within each consecutive 25-episode window.
    pub policy_changes: Vec<u32>,
    pub episodes_to_stability: Option<usize>,
    /// Greedy level per game, 1-based.
    pub final_policy: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub policy: Vec<u8>,
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub window: usize,
    pub stability_definition: String,
    pub loc: TableReport,
    pub lof: TableReport,
    /// Present for stationary simulated learners.
    pub oracle: Option<OracleComparison>,
    /// Per-session engagement proxy; absent for live runs.
    pub engagement: Option<Vec<f64>>,
    pub assessment_before: Option<Assessment>,
    pub assessment_after: Option<Assessment>,
}

fn running_means(rewards: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    rewards
        .iter()
        .enumerate()
        .map(|(i, r)| {
            sum += r;
            sum / (i + 1) as f64
        })
        .collect()
}

fn windowed_means(rewards: &[f64]) -> Vec<f64> {
    (0..rewards.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(WINDOW);
            let w = &rewards[lo..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect()
}

/// First window index from which every window has at most one change.
pub fn stability_window(changes: &[u32]) -> Option<usize> {
    let mut start = changes.len();
    for (i, &c) in changes.iter().enumerate().rev() {
        if c > 1 {
            break;
        }
        start = i;
    }
    (start < changes.len()).then_some(start)
}

struct TableTrace {
    rewards: Vec<f64>,
    changes: Vec<u32>,
    table: QTable,
}

fn trace_table(id: TableId, header: &LogHeader, records: &[EventRecord]) -> TableTrace {
    let params = match id {
        TableId::Loc => header.loc_params,
        TableId::Lof => header.lof_params,
    };
    let mut table = QTable::for_table(id, header.catalog.len(), params.q_init);
    let mut policy = greedy_policy(&table);
    let mut rewards = Vec::new();
    let mut changes = Vec::new();
    for r in records {
        let EventPayload::Episode(e) = &r.payload else { continue };
        if e.table != id {
            continue;
        }
        table.set(e.state, e.action, e.new_value);
        let now = greedy_policy(&table);
        let changed = now.iter().zip(&policy).filter(|(a, b)| a != b).count() as u32;
        policy = now;
        if rewards.len() % WINDOW == 0 {
            changes.push(0);
        }
        *changes.last_mut().expect("window opened") += changed;
        rewards.push(e.reward);
    }
    TableTrace { rewards, changes, table }
}

fn table_report(id: TableId, trace: TableTrace, threshold: u32) -> TableReport {
    let normalized = (id == TableId::Lof).then(|| {
        let n: Vec<f64> = trace.rewards.iter().map(|&r| normalize_lof_reward(r, threshold)).collect();
        running_means(&n)
    });
    TableReport {
        table: id,
        episodes: trace.rewards.len(),
        running_mean: running_means(&trace.rewards),
        windowed_mean: windowed_means(&trace.rewards),
        normalized_running_mean: normalized,
        episodes_to_stability: stability_window(&trace.changes).map(|w| w * WINDOW),
        policy_changes: trace.changes,
        final_policy: greedy_policy(&trace.table).into_iter().map(|a| a as u8 + 1).collect(),
        rewards: trace.rewards,
    }
}

/// Engagement proxy per session: mean over attempts of
/// `1 - |difficulty(loc) - difficulty(target)| / max difficulty gap`.
pub fn engagement_proxy(records: &[EventRecord]) -> Option<Vec<f64>> {
    let mut sessions: Vec<(u32, f64, usize)> = Vec::new();
    for r in records {
        let EventPayload::Attempt(a) = &r.payload else { continue };
        let score = attempt_match(a)?;
        match sessions.last_mut() {
            Some((s, sum, n)) if *s == r.session => {
                *sum += score;
                *n += 1;
            }
            _ => sessions.push((r.session, score, 1)),
        }
    }
    Some(sessions.into_iter().map(|(_, sum, n)| sum / n as f64).collect())
}

fn attempt_match(a: &AttemptRecord) -> Option<f64> {
    let target = a.target_loc?;
    Some(challenge_match(a.loc, target))
}

/// `1` when the played level equals the target, `0` at the far end of the scale.
pub fn challenge_match(loc: u8, target: u8) -> f64 {
    let gap = (f64::from(loc) - f64::from(target)).abs();
    1.0 - gap / (LOC_LEVELS as f64 - 1.0)
}

pub fn header(records: &[EventRecord]) -> Option<&LogHeader> {
    records.iter().find_map(|r| match &r.payload {
        EventPayload::Header(h) => Some(h),
        _ => None,
    })
}

/// Builds the report for a log. A log without a header is read as an empty
/// run over the default catalog.
pub fn convergence_report(records: &[EventRecord]) -> ConvergenceReport {
    let default_header;
    let header = match header(records) {
        Some(h) => h,
        None => {
            default_header = LogHeader {
                schema: super::log::LOG_SCHEMA.into(),
                seed: 0,
                catalog: default_game_catalog(),
                mistake_threshold: crate::model::DEFAULT_MISTAKE_THRESHOLD,
                loc_params: crate::rl::RlParams::challenge_defaults(),
                lof_params: crate::rl::RlParams::feedback_defaults(),
                learner: None,
                assessment: None,
            };
            &default_header
        }
    };
    let loc = table_report(TableId::Loc, trace_table(TableId::Loc, header, records), header.mistake_threshold);
    let lof = table_report(TableId::Lof, trace_table(TableId::Lof, header, records), header.mistake_threshold);

    let oracle = header.learner.as_ref().filter(|l| l.is_stationary()).map(|learner| {
        let policy = cached_oracle_policy(learner, &header.catalog, header.mistake_threshold);
        let agreement = policy_agreement(&loc.final_policy, &policy);
        OracleComparison { policy, agreement }
    });

    let engagement = header.learner.as_ref().and_then(|_| engagement_proxy(records));
    let assessment_after = records.iter().rev().find_map(|r| match &r.payload {
        EventPayload::InterventionEnd { assessment, .. } => *assessment,
        _ => None,
    });
    ConvergenceReport {
        window: WINDOW,
        stability_definition: STABILITY_DEFINITION.into(),
        loc,
        lof,
        oracle,
        engagement,
        assessment_before: header.assessment,
        assessment_after,
    }
}

/// Oracle policy for a report, memoized per (learner, catalog, threshold):
/// batches of runs share a handful of learners.
fn cached_oracle_policy(learner: &LearnerProfile, catalog: &[GameKind], threshold: u32) -> Vec<u8> {
    static CACHE: OnceLock<Mutex<HashMap<String, Vec<u8>>>> = OnceLock::new();
    let key = serde_json::to_string(&(learner, catalog, threshold)).expect("key serializes");
    let cache = CACHE.get_or_init(Mutex::default);
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let policy: Vec<u8> = oracle_policy(learner, catalog, threshold, DEFAULT_ORACLE_TRIALS, ORACLE_SEED)
        .expect("stationary learner")
        .iter()
        .map(|r| r.best.value())
        .collect();
    cache.lock().unwrap().insert(key, policy.clone());
    policy
}

pub fn policy_agreement(a: &[u8], b: &[u8]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Whether an attempt ended by running out of mistakes.
pub fn is_bail_out(a: &AttemptRecord, threshold: u32) -> bool {
    a.outcome == AttemptOutcome::Abandoned && a.mistakes == threshold + 1
}
