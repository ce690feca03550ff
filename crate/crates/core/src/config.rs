//! Engine and intervention configuration.
//!
//! Config files are TOML: top-level keys plus optional `[loc]`, `[lof]`,
//! `[scripts]`, `[hints]` tables and `[[games]]` entries. See
//! `docs/config.md` for the schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controllers::{FeedbackHints, ScriptCatalog};
use crate::error::ConfigError;
use crate::learner::{preset_population, LearnerProfile, Population};
use crate::model::{default_game_catalog, validate_catalog, ChallengeLevel, GameKind, DEFAULT_MISTAKE_THRESHOLD};
use crate::rl::RlParams;

/// Everything the meta-controller needs to run sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub catalog: Vec<GameKind>,
    pub mistake_threshold: u32,
    pub games_per_session: usize,
    pub inquiries_per_session: usize,
    /// Play this challenge level instead of the learned policy. Used for
    /// fixed-level baselines; the table still learns from the outcomes.
    pub fixed_loc: Option<ChallengeLevel>,
    pub loc: RlParams,
    pub lof: RlParams,
    pub scripts: ScriptCatalog,
    pub hints: FeedbackHints,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let catalog = default_game_catalog();
        Self {
            games_per_session: catalog.len(),
            catalog,
            mistake_threshold: DEFAULT_MISTAKE_THRESHOLD,
            inquiries_per_session: 1,
            fixed_loc: None,
            loc: RlParams::challenge_defaults(),
            lof: RlParams::feedback_defaults(),
            scripts: ScriptCatalog::default(),
            hints: FeedbackHints::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_catalog(&self.catalog)?;
        if self.games_per_session == 0 {
            return Err(ConfigError::invalid("games_per_session", "must be at least 1"));
        }
        if self.inquiries_per_session == 0 {
            return Err(ConfigError::invalid("inquiries_per_session", "must be at least 1"));
        }
        self.loc.validate("loc")?;
        self.lof.validate("lof")?;
        self.scripts.validate()?;
        self.hints.validate()?;
        Ok(())
    }
}

/// Who answers the robot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LearnerRef {
    Simulated(String),
    Live,
}

impl LearnerRef {
    pub fn parse(s: &str) -> Self {
        if s == "live" {
            LearnerRef::Live
        } else {
            LearnerRef::Simulated(s.to_string())
        }
    }
}

/// On-disk form of a config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub sessions: Option<u32>,
    pub games_per_session: Option<usize>,
    pub mistake_threshold: Option<u32>,
    pub inquiries_per_session: Option<usize>,
    pub learner: Option<String>,
    /// Population file, relative to the config file.
    pub population: Option<PathBuf>,
    pub fixed_loc: Option<u8>,
    pub loc: Option<RlParams>,
    pub lof: Option<RlParams>,
    pub games: Option<Vec<GameEntry>>,
    pub scripts: Option<ScriptCatalog>,
    pub hints: Option<FeedbackHints>,
}

/// A catalog entry in a config file. Ids follow file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameEntry {
    pub name: String,
    pub description: String,
    pub subtest: crate::model::Subtest,
}

/// A fully resolved simulated or live deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionConfig {
    pub seed: u64,
    pub sessions: u32,
    pub learner: LearnerRef,
    pub population: Population,
    pub engine: EngineConfig,
}

pub const DEFAULT_SESSIONS: u32 = 20;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_LEARNER: &str = "mid";

impl Default for InterventionConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            sessions: DEFAULT_SESSIONS,
            learner: LearnerRef::Simulated(DEFAULT_LEARNER.into()),
            population: preset_population(),
            engine: EngineConfig::default(),
        }
    }
}

impl InterventionConfig {
    pub fn simulated(learner: &str, sessions: u32, seed: u64) -> Self {
        Self {
            seed,
            sessions,
            learner: LearnerRef::Simulated(learner.into()),
            ..Self::default()
        }
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::invalid("<file>", format!("cannot read {}: {e}", path.display())))?;
        let file: ConfigFile =
            toml::from_str(&text).map_err(|e| ConfigError::invalid("<file>", e.to_string()))?;
        Self::from_file(file, path.parent())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| ConfigError::invalid("<file>", e.to_string()))?;
        Self::from_file(file, None)
    }

    pub fn from_file(file: ConfigFile, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut engine = EngineConfig::default();
        if let Some(games) = file.games {
            engine.catalog = games
                .into_iter()
                .enumerate()
                .map(|(id, g)| GameKind { id, name: g.name, description: g.description, subtest: g.subtest })
                .collect();
            engine.games_per_session = engine.catalog.len();
        }
        if let Some(n) = file.games_per_session {
            engine.games_per_session = n;
        }
        if let Some(m) = file.mistake_threshold {
            engine.mistake_threshold = m;
        }
        if let Some(n) = file.inquiries_per_session {
            engine.inquiries_per_session = n;
        }
        if let Some(level) = file.fixed_loc {
            engine.fixed_loc = Some(
                ChallengeLevel::new(level)
                    .map_err(|_| ConfigError::invalid("fixed_loc", format!("{level} is outside [1, 5]")))?,
            );
        }
        if let Some(p) = file.loc {
            engine.loc = p;
        }
        if let Some(p) = file.lof {
            engine.lof = p;
        }
        if let Some(s) = file.scripts {
            engine.scripts = s;
        }
        if let Some(h) = file.hints {
            engine.hints = h;
        }
        let population = match file.population {
            Some(p) => Population::load(&base.map(|b| b.join(&p)).unwrap_or(p))?,
            None => preset_population(),
        };
        let config = Self {
            seed: file.seed.unwrap_or(DEFAULT_SEED),
            sessions: file.sessions.unwrap_or(DEFAULT_SESSIONS),
            learner: LearnerRef::parse(file.learner.as_deref().unwrap_or(DEFAULT_LEARNER)),
            population,
            engine,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sessions == 0 {
            return Err(ConfigError::invalid("sessions", "must be at least 1"));
        }
        self.engine.validate()?;
        if let Some(profile) = self.learner_profile()? {
            profile.validate(self.engine.catalog.len())?;
        }
        Ok(())
    }

    /// The simulated learner, or `None` for live runs.
    pub fn learner_profile(&self) -> Result<Option<LearnerProfile>, ConfigError> {
        match &self.learner {
            LearnerRef::Live => Ok(None),
            LearnerRef::Simulated(name) => self
                .population
                .get(name)
                .cloned()
                .map(Some)
                .ok_or_else(|| ConfigError::invalid("learner", format!("unknown learner {name:?}"))),
        }
    }
}
