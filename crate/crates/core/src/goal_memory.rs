//! Goal discovery, representation and matching.
//!
//! Boolean percept fields that change within one time step form an
//! [`Event`]; its transitions, sorted by predicate, are the event's
//! [`Signature`]. A signature with at least one rising transition is an
//! "interesting" change and, the first time it is seen, becomes a goal in the
//! [`GoalRepresentationMap`]. A goal is later recognized whenever an event
//! contains every transition of the stored signature.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::env::PerceptVector;
use crate::error::{Error, Result};
use crate::motivation::StartStateId;
use crate::scenario::Predicate;

/// Opaque goal identifier, assigned in discovery order and never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalId(pub u32);

impl fmt::Display for GoalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub predicate: Predicate,
    /// `true` for false→true, `false` for true→false.
    pub rising: bool,
}

impl Transition {
    pub fn rising(predicate: Predicate) -> Self {
        Transition { predicate, rising: true }
    }

    pub fn falling(predicate: Predicate) -> Self {
        Transition { predicate, rising: false }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = if self.rising { "+" } else { "-" };
        write!(f, "{arrow}{}", self.predicate)
    }
}

/// Non-empty set of transitions, sorted by predicate, one per predicate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Transition>", into = "Vec<Transition>")]
pub struct Signature(Vec<Transition>);

impl Signature {
    pub fn new(mut transitions: Vec<Transition>) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::InvalidSignature("empty".into()));
        }
        transitions.sort();
        if transitions.windows(2).any(|w| w[0].predicate == w[1].predicate) {
            return Err(Error::InvalidSignature("predicate appears twice".into()));
        }
        Ok(Signature(transitions))
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.0
    }

    pub fn has_rising(&self) -> bool {
        self.0.iter().any(|t| t.rising)
    }

    /// Whether every transition of `other` also appears in `self`.
    pub fn contains(&self, other: &Signature) -> bool {
        other.0.iter().all(|t| self.0.binary_search(t).is_ok())
    }

    /// Predicate values that hold right after the change.
    pub fn post_state(&self) -> impl Iterator<Item = (&Predicate, bool)> {
        self.0.iter().map(|t| (&t.predicate, t.rising))
    }
}

impl TryFrom<Vec<Transition>> for Signature {
    type Error = Error;

    fn try_from(value: Vec<Transition>) -> Result<Self> {
        Signature::new(value)
    }
}

impl From<Signature> for Vec<Transition> {
    fn from(value: Signature) -> Self {
        value.0
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// All boolean changes observed in one time step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub signature: Signature,
}

pub type EventList = Vec<Event>;

/// Diffs two percepts. Continuous distances never produce events; all
/// boolean changes of the step are grouped into a single event.
pub fn detect_events(prev: &PerceptVector, curr: &PerceptVector) -> Result<EventList> {
    let (n_prev, n_curr) = (prev.flag_count(), curr.flag_count());
    if n_prev != n_curr || prev.distances.len() != curr.distances.len() {
        return Err(Error::DimensionMismatch(
            n_prev + prev.distances.len(),
            n_curr + curr.distances.len(),
        ));
    }
    let transitions: Vec<Transition> = prev
        .flags()
        .zip(curr.flags())
        .filter(|((_, a), (_, b))| a != b)
        .map(|((_, _), (p, now))| Transition { predicate: p.clone(), rising: now })
        .collect();
    if transitions.is_empty() {
        return Ok(Vec::new());
    }
    Ok(vec![Event { signature: Signature::new(transitions)? }])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRecord {
    pub goal_id: GoalId,
    pub signature: Signature,
    pub discovery_epoch: u32,
    pub discovery_context: StartStateId,
}

/// The agent's memory of discovered goals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalRepresentationMap {
    records: Vec<GoalRecord>,
}

impl GoalRepresentationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[GoalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = GoalId> + '_ {
        self.records.iter().map(|r| r.goal_id)
    }

    pub fn get(&self, goal: GoalId) -> Result<&GoalRecord> {
        // ids are dense and assigned in order
        self.records
            .get(goal.0 as usize)
            .filter(|r| r.goal_id == goal)
            .ok_or(Error::UnknownGoal(goal.0))
    }

    /// Whether some stored goal is recognized in `signature`.
    pub fn knows(&self, signature: &Signature) -> bool {
        self.records.iter().any(|r| signature.contains(&r.signature))
    }

    /// Adds every novel goal-worthy signature among `events`; returns the
    /// ids of the goals created.
    pub fn discover(&mut self, events: &[Event], epoch: u32, context: StartStateId) -> Vec<GoalId> {
        let mut added = Vec::new();
        for event in events {
            if !event.signature.has_rising() || self.knows(&event.signature) {
                continue;
            }
            let goal_id = GoalId(self.records.len() as u32);
            self.records.push(GoalRecord {
                goal_id,
                signature: event.signature.clone(),
                discovery_epoch: epoch,
                discovery_context: context,
            });
            added.push(goal_id);
        }
        added
    }

    /// Binary Goal Matching feedback for `goal` on the observed events.
    pub fn match_goal(&self, goal: GoalId, events: &[Event]) -> Result<bool> {
        let record = self.get(goal)?;
        Ok(events.iter().any(|e| e.signature.contains(&record.signature)))
    }

    /// Whether the post-change state of `goal` currently holds in `percept`.
    pub fn holds(&self, goal: GoalId, percept: &PerceptVector) -> Result<bool> {
        let record = self.get(goal)?;
        Ok(record
            .signature
            .post_state()
            .all(|(p, value)| percept.flag(p) == Some(value)))
    }
}
