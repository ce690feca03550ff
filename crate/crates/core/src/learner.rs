//! Simulated learners.
//!
//! A learner answers each prompt correctly with probability
//! `p' = p (1 - slip) + (1 - p) guess`, where `p = clamp(theta_g - difficulty(loc))`
//! and `difficulty(loc) = (loc - 1) * difficulty_step`. After feedback at
//! level `f` the probability is scaled by `response_to_feedback[f - 1]`.
//! With probability `help_propensity * (1 - p')` the learner asks for help
//! instead of answering; the remaining mass is a mistake.
//!
//! All simulator constants here are modelling choices, not measured values.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::{LearnerEvent, LearnerEventKind};
use crate::error::{ConfigError, ContractViolation};
use crate::model::{
    AttemptOutcome, ChallengeLevel, FeedbackLevel, GameAttemptState, GameKind, Subtest,
    LEARNED_LOF_LEVELS, LOC_LEVELS,
};
use crate::rl::loc_reward;

pub const DEFAULT_DIFFICULTY_STEP: f64 = 0.2;

/// Feedback level the oracle plays after every mistake or help request.
pub const ORACLE_FEEDBACK_LEVEL: u8 = 2;

pub const DEFAULT_ORACLE_TRIALS: usize = 10_000;

/// Base success probability at which a completed game teaches the most.
pub const GROWTH_PEAK_SUCCESS: f64 = 0.3;
/// Half-width of the triangular growth window around the peak.
pub const GROWTH_WINDOW: f64 = 0.3;

fn default_difficulty_step() -> f64 {
    DEFAULT_DIFFICULTY_STEP
}

fn default_feedback_response() -> [f64; LEARNED_LOF_LEVELS] {
    [1.0, 1.1, 1.2, 1.3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerProfile {
    pub name: String,
    /// Per-game proficiency in `[0, 1]`, indexed by game id.
    pub proficiency: Vec<f64>,
    pub slip: f64,
    pub guess: f64,
    pub help_propensity: f64,
    #[serde(default)]
    pub growth_rate: f64,
    /// Multiplier on answer correctness right after feedback at levels 1-4.
    #[serde(default = "default_feedback_response")]
    pub response_to_feedback: [f64; LEARNED_LOF_LEVELS],
    #[serde(default = "default_difficulty_step")]
    pub difficulty_step: f64,
}

impl LearnerProfile {
    pub fn is_stationary(&self) -> bool {
        self.growth_rate == 0.0
    }

    pub fn validate(&self, games: usize) -> Result<(), ConfigError> {
        let path = |field: &str| format!("learner.{}.{field}", self.name);
        if self.proficiency.len() != games {
            return Err(ConfigError::invalid(
                path("proficiency"),
                format!("expected {games} entries, found {}", self.proficiency.len()),
            ));
        }
        if let Some(i) = self.proficiency.iter().position(|t| !(0.0..=1.0).contains(t)) {
            return Err(ConfigError::invalid(format!("{}[{i}]", path("proficiency")), "must lie in [0, 1]"));
        }
        for (field, value) in [
            ("slip", self.slip),
            ("guess", self.guess),
            ("help_propensity", self.help_propensity),
        ] {
            if !(0.0..1.0).contains(&value) {
                return Err(ConfigError::invalid(path(field), "must lie in [0, 1)"));
            }
        }
        if !(self.growth_rate >= 0.0 && self.growth_rate.is_finite()) {
            return Err(ConfigError::invalid(path("growth_rate"), "must be a finite value >= 0"));
        }
        if let Some(i) = self.response_to_feedback.iter().position(|m| !(0.5..=1.5).contains(m)) {
            return Err(ConfigError::invalid(
                format!("{}[{i}]", path("response_to_feedback")),
                "must lie in [0.5, 1.5]",
            ));
        }
        if !(self.difficulty_step > 0.0 && self.difficulty_step <= 0.25) {
            return Err(ConfigError::invalid(path("difficulty_step"), "must lie in (0, 0.25]"));
        }
        Ok(())
    }

    pub fn difficulty(&self, loc: ChallengeLevel) -> f64 {
        f64::from(loc.value() - 1) * self.difficulty_step
    }

    /// Probability of mastering the problem, before slip and guess.
    pub fn base_success(&self, game: usize, loc: ChallengeLevel) -> f64 {
        (self.proficiency[game] - self.difficulty(loc)).clamp(0.0, 1.0)
    }

    /// Probability that the next answer is correct.
    pub fn answer_probability(
        &self,
        game: usize,
        loc: ChallengeLevel,
        last_feedback: Option<FeedbackLevel>,
    ) -> f64 {
        let p = self.base_success(game, loc);
        let mut p = p * (1.0 - self.slip) + (1.0 - p) * self.guess;
        if let Some(f) = last_feedback.filter(|f| !f.is_bail_out()) {
            p *= self.response_to_feedback[f.index()];
        }
        p.clamp(0.0, 1.0)
    }

    /// Draws the learner's next response.
    pub fn respond<R: Rng + ?Sized>(
        &self,
        game: &GameKind,
        loc: ChallengeLevel,
        last_feedback: Option<FeedbackLevel>,
        rng: &mut R,
    ) -> LearnerEventKind {
        let p = self.answer_probability(game.id, loc, last_feedback);
        let u: f64 = rng.gen();
        if u < p {
            LearnerEventKind::CorrectAnswer
        } else if u < p + self.help_propensity * (1.0 - p) {
            LearnerEventKind::HelpRequest
        } else {
            LearnerEventKind::Mistake
        }
    }

    pub fn respond_event<R: Rng + ?Sized>(
        &self,
        game: &GameKind,
        loc: ChallengeLevel,
        last_feedback: Option<FeedbackLevel>,
        timestamp: u64,
        rng: &mut R,
    ) -> LearnerEvent {
        LearnerEvent::new(self.respond(game, loc, last_feedback, rng), timestamp)
    }

    /// Learning gain factor in `[0, 1]` for a resolved attempt. Zero for
    /// abandoned attempts, games too easy to teach anything, and games so hard
    /// that the learner had no footing.
    pub fn proximity(&self, attempt: &GameAttemptState) -> f64 {
        if attempt.outcome != AttemptOutcome::Completed {
            return 0.0;
        }
        let p = self.base_success(attempt.game.id, attempt.loc);
        (1.0 - (p - GROWTH_PEAK_SUCCESS).abs() / GROWTH_WINDOW).max(0.0)
    }

    /// Applies learning from a resolved attempt; returns the proficiency change.
    pub fn grow(&mut self, attempt: &GameAttemptState) -> Result<f64, ContractViolation> {
        if !attempt.is_resolved() {
            return Err(ContractViolation("cannot learn from an unresolved attempt".into()));
        }
        if self.is_stationary() {
            return Ok(0.0);
        }
        let g = attempt.game.id;
        let before = self.proficiency[g];
        let after = (before + self.growth_rate * self.proximity(attempt)).clamp(0.0, 1.0);
        self.proficiency[g] = after;
        Ok(after - before)
    }

    pub fn mean_proficiency(&self) -> f64 {
        self.proficiency.iter().sum::<f64>() / self.proficiency.len() as f64
    }
}

/// Plays one game attempt to resolution with a fixed feedback level after
/// every mistake or help request (the bail-out still ends the game).
pub fn simulate_attempt<R: Rng + ?Sized>(
    profile: &LearnerProfile,
    game: &GameKind,
    loc: ChallengeLevel,
    feedback: FeedbackLevel,
    threshold: u32,
    rng: &mut R,
) -> GameAttemptState {
    let mut attempt = GameAttemptState::new(game.clone(), loc, threshold);
    let mut last = None;
    while !attempt.is_resolved() {
        match profile.respond(game, loc, last, rng) {
            LearnerEventKind::CorrectAnswer => attempt.complete().expect("open attempt"),
            LearnerEventKind::Mistake => {
                if !attempt.record_mistake().expect("open attempt") {
                    last = Some(feedback);
                }
            }
            LearnerEventKind::HelpRequest => {
                attempt.record_help().expect("open attempt");
                last = Some(feedback);
            }
            _ => unreachable!("respond only yields answers and help requests"),
        }
    }
    attempt
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best: ChallengeLevel,
    /// Estimated expected challenge reward per level 1..=5.
    pub expected: [f64; LOC_LEVELS],
}

fn argmax_level(expected: &[f64; LOC_LEVELS]) -> ChallengeLevel {
    let mut best = 0;
    for i in 1..LOC_LEVELS {
        if expected[i] > expected[best] {
            best = i;
        }
    }
    ChallengeLevel::from_index(best)
}

/// Monte Carlo estimate of the expected challenge reward at every level for
/// one game, and the level that maximizes it.
///
/// Each (game, level) cell draws from its own ChaCha stream, so the result is
/// independent of thread scheduling.
pub fn oracle_optimal_loc(
    profile: &LearnerProfile,
    game: &GameKind,
    threshold: u32,
    n_trials: usize,
    seed: u64,
) -> Result<OracleResult, ContractViolation> {
    if !profile.is_stationary() {
        return Err(ContractViolation(format!(
            "oracle requires a stationary learner; {} has growth_rate {}",
            profile.name, profile.growth_rate
        )));
    }
    if n_trials == 0 {
        return Err(ContractViolation("oracle needs at least one trial".into()));
    }
    let feedback = FeedbackLevel::new(ORACLE_FEEDBACK_LEVEL).expect("valid level");
    let totals: Vec<f64> = (0..LOC_LEVELS)
        .into_par_iter()
        .map(|i| {
            let loc = ChallengeLevel::from_index(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((game.id * LOC_LEVELS + i) as u64);
            let sum: i64 = (0..n_trials)
                .map(|_| {
                    let a = simulate_attempt(profile, game, loc, feedback, threshold, &mut rng);
                    i64::from(loc_reward(loc, a.mistakes, threshold))
                })
                .sum();
            sum as f64 / n_trials as f64
        })
        .collect();
    let mut expected = [0.0; LOC_LEVELS];
    expected.copy_from_slice(&totals);
    Ok(OracleResult { best: argmax_level(&expected), expected })
}

/// Oracle over a whole catalog.
pub fn oracle_policy(
    profile: &LearnerProfile,
    catalog: &[GameKind],
    threshold: u32,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<OracleResult>, ContractViolation> {
    catalog
        .iter()
        .map(|g| oracle_optimal_loc(profile, g, threshold, n_trials, seed))
        .collect()
}

/// Exact expected challenge reward per level under a fixed feedback level,
/// by dynamic programming over (mistakes so far, feedback received yet).
pub fn expected_loc_rewards(
    profile: &LearnerProfile,
    game: usize,
    threshold: u32,
    feedback: FeedbackLevel,
) -> [f64; LOC_LEVELS] {
    let mut out = [0.0; LOC_LEVELS];
    for (i, slot) in out.iter_mut().enumerate() {
        let loc = ChallengeLevel::from_index(i);
        let split = |p: f64| {
            let help = profile.help_propensity * (1.0 - p);
            (p, help, 1.0 - p - help)
        };
        let (c0, h0, k0) = split(profile.answer_probability(game, loc, None));
        let (c1, h1, k1) = split(profile.answer_probability(game, loc, Some(feedback)));
        // after[m]: completion probability with m mistakes made and feedback given
        let m_max = threshold as usize;
        let mut after = vec![0.0; m_max + 2];
        for m in (0..=m_max).rev() {
            after[m] = (c1 + k1 * after[m + 1]) / (1.0 - h1);
        }
        let complete = c0 + h0 * after[0] + k0 * after[1];
        let c = f64::from(loc.value());
        *slot = c * (2.0 * complete - 1.0);
    }
    out
}

/// Level that maximizes [`expected_loc_rewards`] under the oracle's feedback level.
pub fn exact_optimal_loc(profile: &LearnerProfile, game: usize, threshold: u32) -> ChallengeLevel {
    let feedback = FeedbackLevel::new(ORACLE_FEEDBACK_LEVEL).expect("valid level");
    argmax_level(&expected_loc_rewards(profile, game, threshold, feedback))
}

/// Assessment proxy: mean proficiency over numerical-operation games and over
/// math-reasoning games, scaled to `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub numerical_operations: f64,
    pub math_reasoning: f64,
}

pub fn assess(profile: &LearnerProfile, catalog: &[GameKind]) -> Assessment {
    let mean_for = |tag: Subtest| {
        let thetas: Vec<f64> = catalog
            .iter()
            .filter(|g| g.subtest == tag)
            .map(|g| profile.proficiency[g.id])
            .collect();
        if thetas.is_empty() {
            0.0
        } else {
            100.0 * thetas.iter().sum::<f64>() / thetas.len() as f64
        }
    };
    Assessment {
        numerical_operations: mean_for(Subtest::No),
        math_reasoning: mean_for(Subtest::Mr),
    }
}

/// A named collection of learner profiles, as stored in a population file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Population {
    #[serde(rename = "learner")]
    pub learners: Vec<LearnerProfile>,
}

impl Population {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::invalid("population", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::invalid("population", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("population serializes")
    }

    pub fn get(&self, name: &str) -> Option<&LearnerProfile> {
        self.learners.iter().find(|l| l.name == name)
    }

    pub fn validate(&self, games: usize) -> Result<(), ConfigError> {
        let mut seen = BTreeMap::new();
        for (i, l) in self.learners.iter().enumerate() {
            if seen.insert(l.name.clone(), i).is_some() {
                return Err(ConfigError::invalid(
                    format!("learner[{i}].name"),
                    format!("duplicate learner {:?}", l.name),
                ));
            }
            l.validate(games)?;
        }
        Ok(())
    }
}

/// Built-in learners for the ten-game catalog.
///
/// Per-game proficiencies are placed away from the points where two
/// challenge levels have equal expected reward, so each game has a
/// well-defined best level.
pub fn preset_population() -> Population {
    let profile = |name: &str, proficiency: [f64; 10], slip, guess, help, growth, response| {
        LearnerProfile {
            name: name.to_string(),
            proficiency: proficiency.to_vec(),
            slip,
            guess,
            help_propensity: help,
            growth_rate: growth,
            response_to_feedback: response,
            difficulty_step: DEFAULT_DIFFICULTY_STEP,
        }
    };
    Population {
        learners: vec![
            profile(
                "low",
                [0.2, 0.15, 0.2, 0.4, 0.2, 0.15, 0.2, 0.4, 0.2, 0.15],
                0.05,
                0.0,
                0.3,
                0.0,
                [1.0, 1.1, 1.2, 1.3],
            ),
            profile(
                "mid",
                [0.4, 0.7, 0.4, 0.7, 0.2, 0.4, 0.7, 0.4, 0.9, 0.4],
                0.05,
                0.0,
                0.3,
                0.0,
                [1.0, 1.1, 1.2, 1.3],
            ),
            profile(
                "high",
                [0.9, 0.9, 0.7, 0.9, 0.9, 0.7, 0.9, 0.9, 0.7, 0.9],
                0.03,
                0.0,
                0.3,
                0.0,
                [1.0, 1.05, 1.1, 1.15],
            ),
            profile(
                "high-help",
                [0.4, 0.6, 0.4, 0.2, 0.6, 0.4, 0.6, 0.4, 0.2, 0.6],
                0.05,
                0.0,
                0.6,
                0.0,
                [1.0, 1.1, 1.2, 1.3],
            ),
            profile(
                "uneven",
                [0.2, 0.4, 0.7, 0.9, 0.2, 0.4, 0.7, 0.9, 0.4, 0.7],
                0.05,
                0.0,
                0.3,
                0.0,
                [1.0, 1.1, 1.2, 1.3],
            ),
            profile(
                "fast-growth",
                [0.45, 0.5, 0.45, 0.55, 0.5, 0.45, 0.55, 0.5, 0.45, 0.5],
                0.05,
                0.02,
                0.3,
                0.01,
                [1.0, 1.1, 1.2, 1.3],
            ),
        ],
    }
}

pub fn preset(name: &str) -> Option<LearnerProfile> {
    preset_population().get(name).cloned()
}

/// Names of the stationary presets.
pub fn stationary_preset_names() -> Vec<String> {
    preset_population()
        .learners
        .into_iter()
        .filter(LearnerProfile::is_stationary)
        .map(|l| l.name)
        .collect()
}
