//! Domain vocabulary shared across the engine: the game catalog, challenge
//! and feedback levels, per-game attempt state, robot acts and session phases.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ContractViolation};

/// Default mistake threshold. A game is abandoned on mistake `M + 1`.
pub const DEFAULT_MISTAKE_THRESHOLD: u32 = 5;

/// Number of challenge levels.
pub const LOC_LEVELS: usize = 5;

/// Number of feedback levels the personalization policy may choose from.
/// Level 5 exists but is only reached through the forced bail-out.
pub const LEARNED_LOF_LEVELS: usize = 4;

/// Assessment subtest a game exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Subtest {
    /// Numerical operations.
    No,
    /// Math reasoning.
    Mr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameKind {
    pub id: usize,
    pub name: String,
    pub description: String,
    pub subtest: Subtest,
}

/// The shipped ten-game space-math catalog.
///
/// "Select Galaxy" is split into a more-stars and a fewer-stars variant.
pub fn default_game_catalog() -> Vec<GameKind> {
    const ENTRIES: [(&str, &str, Subtest); 10] = [
        ("Pack Moon-Rocks", "Drag the requested number of moon-rocks into a box.", Subtest::No),
        ("Select Galaxy More", "Select the galaxy with more stars.", Subtest::Mr),
        ("Select Galaxy Fewer", "Select the galaxy with fewer stars.", Subtest::Mr),
        ("Select Planet", "Select the planet showing a particular number.", Subtest::No),
        ("Feed Space Pets", "Share a set of stars evenly between two alien pets.", Subtest::No),
        ("Pets on a Spaceship", "Board numbered alien pets in increasing or decreasing order.", Subtest::No),
        ("Organize Moon-Rocks", "Sort moon-rocks by sprite and number.", Subtest::No),
        ("Organize Space Objects", "Sort space objects by sprite and number.", Subtest::No),
        ("Pattern Completion", "Complete a pattern of space objects.", Subtest::Mr),
        ("Identify Alien Emotion", "Name the emotion shown on an alien friend's face.", Subtest::Mr),
    ];
    ENTRIES
        .iter()
        .enumerate()
        .map(|(id, (name, description, subtest))| GameKind {
            id,
            name: (*name).to_string(),
            description: (*description).to_string(),
            subtest: *subtest,
        })
        .collect()
}

/// Checks that catalog ids are exactly `0..len` in order and names are distinct.
pub fn validate_catalog(catalog: &[GameKind]) -> Result<(), ConfigError> {
    if catalog.is_empty() {
        return Err(ConfigError::invalid("catalog", "game catalog is empty"));
    }
    for (i, game) in catalog.iter().enumerate() {
        if game.id != i {
            return Err(ConfigError::invalid(
                format!("catalog[{i}].id"),
                format!("expected id {i}, found {}", game.id),
            ));
        }
        if catalog[..i].iter().any(|g| g.name == game.name) {
            return Err(ConfigError::invalid(
                format!("catalog[{i}].name"),
                format!("duplicate game name {:?}", game.name),
            ));
        }
    }
    Ok(())
}

/// One block of games for a session: a uniformly random permutation of the
/// whole catalog.
pub fn plan_session_games<R: Rng + ?Sized>(
    catalog: &[GameKind],
    rng: &mut R,
) -> Result<Vec<GameKind>, ConfigError> {
    if catalog.is_empty() {
        return Err(ConfigError::invalid("catalog", "cannot plan a session from an empty catalog"));
    }
    let mut plan = catalog.to_vec();
    plan.shuffle(rng);
    Ok(plan)
}

macro_rules! bounded_level {
    ($name:ident, $max:expr, $what:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "u8", into = "u8")]
        pub struct $name(u8);

        impl $name {
            pub const MIN: u8 = 1;
            pub const MAX: u8 = $max;

            pub fn new(value: u8) -> Result<Self, ContractViolation> {
                if (Self::MIN..=Self::MAX).contains(&value) {
                    Ok(Self(value))
                } else {
                    Err(ContractViolation(format!(
                        concat!($what, " {} outside [{}, {}]"),
                        value,
                        Self::MIN,
                        Self::MAX
                    )))
                }
            }

            pub fn value(self) -> u8 {
                self.0
            }

            /// Zero-based index, the action index in a Q-table row.
            pub fn index(self) -> usize {
                usize::from(self.0 - 1)
            }
        }

        impl TryFrom<u8> for $name {
            type Error = ContractViolation;
            fn try_from(value: u8) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl From<$name> for u8 {
            fn from(level: $name) -> u8 {
                level.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

bounded_level!(ChallengeLevel, 5, "challenge level");
bounded_level!(FeedbackLevel, 5, "feedback level");

impl ChallengeLevel {
    pub fn from_index(index: usize) -> Self {
        assert!(index < LOC_LEVELS, "challenge action index {index} out of range");
        Self(index as u8 + 1)
    }
}

impl FeedbackLevel {
    /// The bail-out level, never chosen by the learned policy.
    pub const BAIL_OUT: FeedbackLevel = FeedbackLevel(5);

    pub fn from_index(index: usize) -> Self {
        assert!(index < LEARNED_LOF_LEVELS, "feedback action index {index} out of range");
        Self(index as u8 + 1)
    }

    pub fn is_bail_out(self) -> bool {
        self == Self::BAIL_OUT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    InProgress,
    Completed,
    Abandoned,
}

/// A single play-through of one game at one challenge level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameAttemptState {
    pub game: GameKind,
    pub loc: ChallengeLevel,
    pub mistakes: u32,
    pub help_requests: u32,
    pub outcome: AttemptOutcome,
    pub mistake_threshold: u32,
}

impl GameAttemptState {
    pub fn new(game: GameKind, loc: ChallengeLevel, mistake_threshold: u32) -> Self {
        Self {
            game,
            loc,
            mistakes: 0,
            help_requests: 0,
            outcome: AttemptOutcome::InProgress,
            mistake_threshold,
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.outcome != AttemptOutcome::InProgress
    }

    /// True once the mistake count has passed the threshold.
    pub fn over_threshold(&self) -> bool {
        self.mistakes > self.mistake_threshold
    }

    /// Records a mistake. Returns `true` when this mistake exhausts the
    /// allowance and abandons the attempt.
    pub fn record_mistake(&mut self) -> Result<bool, ContractViolation> {
        self.ensure_open()?;
        self.mistakes += 1;
        if self.over_threshold() {
            self.outcome = AttemptOutcome::Abandoned;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn record_help(&mut self) -> Result<(), ContractViolation> {
        self.ensure_open()?;
        self.help_requests += 1;
        Ok(())
    }

    pub fn complete(&mut self) -> Result<(), ContractViolation> {
        self.ensure_open()?;
        self.outcome = AttemptOutcome::Completed;
        Ok(())
    }

    fn ensure_open(&self) -> Result<(), ContractViolation> {
        if self.is_resolved() {
            Err(ContractViolation(format!(
                "attempt at {} already {:?}",
                self.game.name, self.outcome
            )))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActCategory {
    Disclosure,
    Promise,
    Instruction,
    Feedback,
    Inquiry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActPayload {
    Instruction {
        game_id: usize,
        game_name: String,
        loc: ChallengeLevel,
        /// Seeds the client-side problem generator so the instance is reproducible.
        problem_seed: u64,
    },
    Feedback {
        game_id: usize,
        level: FeedbackLevel,
        hint: String,
    },
    /// Marks a closing promise that reports the opening promise as kept.
    Fulfillment,
}

/// A socially assistive robot act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarAct {
    pub category: ActCategory,
    pub utterance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<ActPayload>,
}

impl SarAct {
    pub fn scripted(category: ActCategory, utterance: impl Into<String>) -> Self {
        Self { category, utterance: utterance.into(), payload: None }
    }

    pub fn instruction(game: &GameKind, loc: ChallengeLevel, problem_seed: u64) -> Self {
        Self {
            category: ActCategory::Instruction,
            utterance: format!("Let's play {}! {}", game.name, game.description),
            payload: Some(ActPayload::Instruction {
                game_id: game.id,
                game_name: game.name.clone(),
                loc,
                problem_seed,
            }),
        }
    }

    pub fn feedback(game: &GameKind, level: FeedbackLevel, hint: impl Into<String>) -> Self {
        let hint = hint.into();
        Self {
            category: ActCategory::Feedback,
            utterance: hint.clone(),
            payload: Some(ActPayload::Feedback { game_id: game.id, level, hint }),
        }
    }

    pub fn feedback_level(&self) -> Option<FeedbackLevel> {
        match &self.payload {
            Some(ActPayload::Feedback { level, .. }) => Some(*level),
            _ => None,
        }
    }

    pub fn instruction_loc(&self) -> Option<(usize, ChallengeLevel)> {
        match &self.payload {
            Some(ActPayload::Instruction { game_id, loc, .. }) => Some((*game_id, *loc)),
            _ => None,
        }
    }

    pub fn is_fulfillment(&self) -> bool {
        matches!(self.payload, Some(ActPayload::Fulfillment))
    }

    /// Payload shape must match the category.
    pub fn is_well_formed(&self) -> bool {
        match (self.category, &self.payload) {
            (ActCategory::Instruction, Some(ActPayload::Instruction { .. })) => true,
            (ActCategory::Feedback, Some(ActPayload::Feedback { .. })) => true,
            (ActCategory::Promise, None | Some(ActPayload::Fulfillment)) => true,
            (ActCategory::Disclosure | ActCategory::Inquiry, None) => true,
            _ => false,
        }
    }
}

/// Session phases in the order they are entered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    OpeningDisclosure,
    OpeningPromise,
    GameLoop,
    ClosingPromiseFulfillment,
    ClosingInquiry,
    Ended,
}

impl SessionPhase {
    /// Whether `category` may be emitted while the session is in this phase.
    pub fn permits(self, category: ActCategory) -> bool {
        match self {
            SessionPhase::OpeningDisclosure => category == ActCategory::Disclosure,
            SessionPhase::OpeningPromise => category == ActCategory::Promise,
            SessionPhase::GameLoop => {
                matches!(category, ActCategory::Instruction | ActCategory::Feedback)
            }
            SessionPhase::ClosingPromiseFulfillment => category == ActCategory::Promise,
            SessionPhase::ClosingInquiry => category == ActCategory::Inquiry,
            SessionPhase::Ended => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_catalog_has_ten_contiguous_games() {
        let catalog = default_game_catalog();
        assert_eq!(catalog.len(), 10);
        assert_eq!(catalog[0].name, "Pack Moon-Rocks");
        assert_eq!(catalog[1].name, "Select Galaxy More");
        assert_eq!(catalog[2].name, "Select Galaxy Fewer");
        assert_eq!(catalog[9].name, "Identify Alien Emotion");
        for (i, g) in catalog.iter().enumerate() {
            assert_eq!(g.id, i);
        }
        validate_catalog(&catalog).unwrap();
    }

    #[test]
    fn plan_is_permutation() {
        let catalog = default_game_catalog();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let plan = plan_session_games(&catalog, &mut rng).unwrap();
        let mut ids: Vec<_> = plan.iter().map(|g| g.id).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn plan_singleton_and_empty() {
        let catalog = vec![default_game_catalog().remove(0)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(plan_session_games(&catalog, &mut rng).unwrap(), catalog);
        assert!(plan_session_games(&[], &mut rng).is_err());
    }

    #[test]
    fn different_seeds_give_different_orders() {
        let catalog = default_game_catalog();
        let mut differing = 0;
        for pair in 0..100u64 {
            let a = plan_session_games(&catalog, &mut ChaCha8Rng::seed_from_u64(2 * pair + 1)).unwrap();
            let b = plan_session_games(&catalog, &mut ChaCha8Rng::seed_from_u64(2 * pair + 2)).unwrap();
            if a != b {
                differing += 1;
            }
        }
        // P(equal) = 1/10! per pair, so any collision here is a bug.
        assert_eq!(differing, 100);
    }

    #[test]
    fn level_ranges() {
        assert!(ChallengeLevel::new(0).is_err());
        assert!(ChallengeLevel::new(6).is_err());
        assert_eq!(ChallengeLevel::new(5).unwrap().index(), 4);
        assert!(FeedbackLevel::new(5).unwrap().is_bail_out());
        assert_eq!(FeedbackLevel::from_index(1).value(), 2);
        let parsed: Result<ChallengeLevel, _> = serde_json::from_str("7");
        assert!(parsed.is_err());
    }

    #[test]
    fn attempt_abandons_on_mistake_past_threshold() {
        let game = default_game_catalog().remove(0);
        let mut attempt = GameAttemptState::new(game, ChallengeLevel::new(3).unwrap(), 5);
        for _ in 0..5 {
            assert!(!attempt.record_mistake().unwrap());
        }
        assert_eq!(attempt.outcome, AttemptOutcome::InProgress);
        assert!(attempt.record_mistake().unwrap());
        assert_eq!(attempt.outcome, AttemptOutcome::Abandoned);
        assert_eq!(attempt.mistakes, 6);
        // one-way
        assert!(attempt.complete().is_err());
        assert!(attempt.record_help().is_err());
        assert_eq!(attempt.outcome, AttemptOutcome::Abandoned);
    }

    #[test]
    fn zero_threshold_abandons_on_first_mistake() {
        let game = default_game_catalog().remove(4);
        let mut attempt = GameAttemptState::new(game, ChallengeLevel::new(1).unwrap(), 0);
        assert!(attempt.record_mistake().unwrap());
    }

    #[test]
    fn phase_permissions() {
        assert!(SessionPhase::GameLoop.permits(ActCategory::Feedback));
        assert!(!SessionPhase::OpeningPromise.permits(ActCategory::Instruction));
        assert!(!SessionPhase::Ended.permits(ActCategory::Inquiry));
        assert!(SessionPhase::OpeningDisclosure < SessionPhase::Ended);
    }

    #[test]
    fn act_payloads_match_category() {
        let game = default_game_catalog().remove(0);
        assert!(SarAct::instruction(&game, ChallengeLevel::new(2).unwrap(), 9).is_well_formed());
        assert!(SarAct::feedback(&game, FeedbackLevel::new(2).unwrap(), "x").is_well_formed());
        let mut bad = SarAct::scripted(ActCategory::Instruction, "go");
        assert!(!bad.is_well_formed());
        bad.category = ActCategory::Inquiry;
        assert!(bad.is_well_formed());
    }
}
