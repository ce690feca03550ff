//! Hierarchical personalization for a tutoring robot.
//!
//! A session meta-controller sequences scripted social acts around a game
//! loop, and two tabular Q-learners personalize the game loop: one picks the
//! challenge level per game, the other picks the feedback level after each
//! mistake or help request.

pub mod config;
pub mod controllers;
pub mod error;
pub mod learner;
pub mod model;
pub mod rl;
pub mod runner;
pub mod service;

pub use config::{EngineConfig, InterventionConfig, LearnerRef};
pub use controllers::{LearnerEvent, LearnerEventKind, MetaController, StepOutcome};
pub use error::{ConfigError, ContractViolation, Error, LogError, ProtocolError, Result};
pub use learner::{LearnerProfile, Population};
pub use model::{ActCategory, ChallengeLevel, FeedbackLevel, GameKind, SarAct, SessionPhase};
pub use rl::{QTable, RlParams, TableId};
pub mod textplay;
