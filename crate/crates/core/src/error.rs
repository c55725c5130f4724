use thiserror::Error;

use crate::scenario::PhaseId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("failed to parse scenario: {0}")]
    Parse(String),
    #[error("unknown phase id {0}")]
    UnknownPhase(PhaseId),
    #[error("unknown object id `{0}`")]
    UnknownObject(String),
    #[error("duplicate object id `{0}`")]
    DuplicateObject(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown goal id {0}")]
    UnknownGoal(u32),
    #[error("unknown start state `{0}`")]
    UnknownStartState(String),
    #[error("start state `{0}` cannot be realized in the current phase")]
    Unrealizable(String),
    #[error("percept dimensionality mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cannot sample from an empty value list")]
    EmptyValues,
    #[error("softmax temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("no known goals to select from")]
    NoKnownGoals,
    #[error("invalid signature: {0}")]
    InvalidSignature(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
