use std::io;

use thiserror::Error;

use crate::model::SessionPhase;

/// A configuration value failed validation. `path` names the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid configuration at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

/// A caller broke an operation's precondition.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("contract violation: {0}")]
pub struct ContractViolation(pub String);

/// An event arrived that the session cannot accept in its current phase.
/// The event is dropped and the session state is left untouched.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("protocol error: {event} not accepted in phase {phase:?}")]
pub struct ProtocolError {
    pub phase: SessionPhase,
    pub event: String,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("corrupt log: missing sequence number {missing}")]
    Gap { missing: u64 },
    #[error("corrupt log at sequence {seq}: {reason}")]
    Inconsistent { seq: u64, reason: String },
    #[error("malformed log line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl LogError {
    pub fn first_missing(&self) -> Option<u64> {
        match self {
            LogError::Gap { missing } => Some(*missing),
            _ => None,
        }
    }
}

/// Top-level error for library operations that mix failure kinds.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Contract(#[from] ContractViolation),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
