//! Tabular Q-learning kernel and the two personalization reward functions.
//!
//! The challenge table has one row per game and one column per challenge
//! level (10 x 5). The feedback table has one row per game and one column per
//! learnable feedback level (10 x 4).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ContractViolation};
use crate::model::{ChallengeLevel, FeedbackLevel, LEARNED_LOF_LEVELS, LOC_LEVELS};

/// Challenge reward: `c` while the mistake count is within the threshold,
/// `-c` once it has been exceeded.
pub fn loc_reward(level: ChallengeLevel, mistakes: u32, threshold: u32) -> i32 {
    let c = i32::from(level.value());
    if mistakes <= threshold {
        c
    } else {
        -c
    }
}

/// Feedback reward: `-f / (m + h + 1)` plus a bonus of 5 while the mistake
/// count is within the threshold.
///
/// The bail-out level is not part of the learned action space and is rejected.
pub fn lof_reward(
    level: FeedbackLevel,
    mistakes: u32,
    help_requests: u32,
    threshold: u32,
) -> Result<f64, ContractViolation> {
    if level.is_bail_out() {
        return Err(ContractViolation(
            "feedback level 5 is forced, never rewarded".to_string(),
        ));
    }
    let bonus = if mistakes <= threshold { 5.0 } else { 0.0 };
    let denom = f64::from(mistakes) + f64::from(help_requests) + 1.0;
    Ok(-f64::from(level.value()) / denom + bonus)
}

/// Closed range `[lo, hi]` covering every feedback reward for a threshold,
/// used to normalize reward curves onto `[0, 1]`.
pub fn lof_reward_bounds(threshold: u32) -> (f64, f64) {
    let max_level = LEARNED_LOF_LEVELS as f64;
    (-max_level / (f64::from(threshold) + 2.0), 5.0)
}

pub fn normalize_lof_reward(reward: f64, threshold: u32) -> f64 {
    let (lo, hi) = lof_reward_bounds(threshold);
    ((reward - lo) / (hi - lo)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// Fixed learning rate.
    Constant,
    /// `max(learning_rate, 1 / n)` where `n` counts updates to the cell:
    /// a sample average early on that settles to the fixed rate.
    VisitCount,
}

/// Learning hyperparameters for one table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    /// Multiplicative decay applied once per completed episode.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub q_init: f64,
    pub step_size: StepSize,
}

impl Default for RlParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            discount: 0.0,
            epsilon_start: 0.3,
            epsilon_decay: 0.995,
            epsilon_min: 0.05,
            q_init: 0.0,
            step_size: StepSize::Constant,
        }
    }
}

impl RlParams {
    /// Defaults for the challenge table. The challenge problem sees one
    /// episode per game, so it explores harder and averages samples early.
    pub fn challenge_defaults() -> Self {
        Self {
            epsilon_start: 1.0,
            epsilon_decay: 0.99,
            step_size: StepSize::VisitCount,
            ..Self::default()
        }
    }

    pub fn feedback_defaults() -> Self {
        Self::default()
    }

    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        let check = |ok: bool, field: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::invalid(format!("{path}.{field}"), msg))
            }
        };
        check(
            self.learning_rate > 0.0 && self.learning_rate <= 1.0,
            "learning_rate",
            "must lie in (0, 1]",
        )?;
        check((0.0..1.0).contains(&self.discount), "discount", "must lie in [0, 1)")?;
        check((0.0..=1.0).contains(&self.epsilon_start), "epsilon_start", "must lie in [0, 1]")?;
        check(
            self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0,
            "epsilon_decay",
            "must lie in (0, 1]",
        )?;
        check(
            (0.0..=self.epsilon_start).contains(&self.epsilon_min),
            "epsilon_min",
            "must lie in [0, epsilon_start]",
        )?;
        check(self.q_init.is_finite(), "q_init", "must be finite")?;
        Ok(())
    }

    /// Exploration rate after `episodes` completed episodes.
    pub fn epsilon_after(&self, episodes: u64) -> f64 {
        let exp = i32::try_from(episodes).unwrap_or(i32::MAX);
        (self.epsilon_start * self.epsilon_decay.powi(exp)).max(self.epsilon_min)
    }
}

/// Which personalization problem a table belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    Loc,
    Lof,
}

impl TableId {
    pub fn actions(self) -> usize {
        match self {
            TableId::Loc => LOC_LEVELS,
            TableId::Lof => LEARNED_LOF_LEVELS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

/// Result of a single cell update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellUpdate {
    pub old: f64,
    pub new: f64,
}

impl QTable {
    pub fn new(states: usize, actions: usize, q_init: f64) -> Self {
        assert!(states > 0 && actions > 0, "empty Q-table");
        Self {
            states,
            actions,
            values: vec![q_init; states * actions],
            visits: vec![0; states * actions],
        }
    }

    pub fn for_table(id: TableId, states: usize, q_init: f64) -> Self {
        Self::new(states, id.actions(), q_init)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn cells(&self) -> usize {
        self.states * self.actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[self.idx(state, action)]
    }

    pub fn visits(&self, state: usize, action: usize) -> u64 {
        self.visits[self.idx(state, action)]
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }

    pub fn row(&self, state: usize) -> &[f64] {
        assert!(state < self.states, "state {state} out of range");
        &self.values[state * self.actions..(state + 1) * self.actions]
    }

    pub fn row_max(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        let i = self.idx(state, action);
        self.values[i] = value;
    }

    fn idx(&self, state: usize, action: usize) -> usize {
        assert!(
            state < self.states && action < self.actions,
            "cell ({state}, {action}) outside {}x{} table",
            self.states,
            self.actions
        );
        state * self.actions + action
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    pub fn from_parts(
        states: usize,
        actions: usize,
        values: Vec<f64>,
        visits: Vec<u64>,
    ) -> Result<Self, ContractViolation> {
        if states == 0 || actions == 0 {
            return Err(ContractViolation("table dimensions must be positive".into()));
        }
        if values.len() != states * actions || visits.len() != states * actions {
            return Err(ContractViolation(format!(
                "expected {} cells, got {} values and {} visit counts",
                states * actions,
                values.len(),
                visits.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ContractViolation("non-finite Q-value".into()));
        }
        Ok(Self { states, actions, values, visits })
    }
}

/// Epsilon-greedy action choice. Greedy ties are broken uniformly at random.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    state: usize,
    epsilon: f64,
    rng: &mut R,
) -> usize {
    let row = q.row(state);
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..row.len());
    }
    let best = q.row_max(state);
    let tied: Vec<usize> = (0..row.len()).filter(|&a| row[a] == best).collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}

/// One Q-learning backup. `next_state = None` marks a terminal transition
/// with no bootstrap term.
pub fn q_update(
    q: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next_state: Option<usize>,
    params: &RlParams,
) -> Result<CellUpdate, ContractViolation> {
    if !reward.is_finite() {
        return Err(ContractViolation(format!("non-finite reward {reward}")));
    }
    let i = q.idx(state, action);
    let bootstrap = match next_state {
        Some(s) if params.discount > 0.0 => params.discount * q.row_max(s),
        Some(s) => {
            // still validate the index
            let _ = q.row(s);
            0.0
        }
        None => 0.0,
    };
    q.visits[i] += 1;
    let alpha = match params.step_size {
        StepSize::Constant => params.learning_rate,
        StepSize::VisitCount => params.learning_rate.max(1.0 / q.visits[i] as f64),
    };
    let old = q.values[i];
    let new = old + alpha * (reward + bootstrap - old);
    q.values[i] = new;
    Ok(CellUpdate { old, new })
}

/// Per-state argmax with lowest-index tie-break.
pub fn greedy_policy(q: &QTable) -> Vec<usize> {
    (0..q.states())
        .map(|s| {
            let row = q.row(s);
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Versioned on-disk form of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSnapshot {
    pub schema: String,
    pub table: TableId,
    pub states: usize,
    pub actions: usize,
    pub values: Vec<Vec<f64>>,
    pub visits: Vec<Vec<u64>>,
    pub params: RlParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<ChaCha8Rng>,
}

pub const SNAPSHOT_SCHEMA: &str = "hhrl.qtable/1";

impl TableSnapshot {
    pub fn capture(id: TableId, q: &QTable, params: RlParams, rng: Option<&ChaCha8Rng>) -> Self {
        Self {
            schema: SNAPSHOT_SCHEMA.to_string(),
            table: id,
            states: q.states,
            actions: q.actions,
            values: q.values.chunks(q.actions).map(<[f64]>::to_vec).collect(),
            visits: q.visits.chunks(q.actions).map(<[u64]>::to_vec).collect(),
            params,
            rng: rng.cloned(),
        }
    }

    pub fn to_table(&self) -> Result<QTable, ContractViolation> {
        if self.schema != SNAPSHOT_SCHEMA {
            return Err(ContractViolation(format!("unsupported snapshot schema {:?}", self.schema)));
        }
        if self.values.len() != self.states || self.visits.len() != self.states {
            return Err(ContractViolation("row count does not match `states`".into()));
        }
        QTable::from_parts(
            self.states,
            self.actions,
            self.values.concat(),
            self.visits.concat(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
