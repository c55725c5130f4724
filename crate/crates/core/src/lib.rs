//! Open-ended learning agent with hierarchical goal curricula, and the
//! tabletop simulator it learns in.
//!
//! The agent discovers goals as percept-change signatures, picks goals to
//! practice by competence progress, chains them with per-goal Q-learned
//! meta-policies, and reaches each one with a small learned utility model.

pub mod agent;
pub mod curriculum;
pub mod env;
pub mod error;
pub mod experts;
pub mod goal_memory;
pub mod motivation;
pub mod scenario;

pub use agent::{Agent, AgentParams, EpochRecord, Variant};
pub use env::{Action, EnvState, PerceptVector, Tabletop};
pub use error::{ConfigError, Error, Result};
pub use goal_memory::{GoalId, GoalRepresentationMap, Signature};
pub use scenario::{Predicate, ScenarioConfig};
