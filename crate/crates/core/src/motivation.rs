//! Intrinsic-motivation bookkeeping and the three softmax bandits.
//!
//! * [`CompetenceTracker`]: per-goal competence, an EMA of epoch success,
//!   and the last competence change.
//! * [`GoalSelector`]: competence-based intrinsic motivation per goal (EMA
//!   of competence changes), sampled with a softmax.
//! * [`MotivationSelector`]: two arms, discovering new goals versus
//!   improving competence on known ones.
//! * [`StateSelector`]: archive of start states for discovery epochs,
//!   valued by how many new goals exploring from them produced.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goal_memory::GoalId;

/// Softmax distribution of `values` at `temperature`, computed after
/// subtracting the maximum so no exponent is positive.
pub fn softmax_probabilities(values: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidTemperature(temperature));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = values.iter().map(|v| ((v - max) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// Draws an index from the softmax distribution of `values`.
pub fn softmax_sample(values: &[f64], temperature: f64, rng: &mut impl Rng) -> Result<usize> {
    let probs = softmax_probabilities(values, temperature)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // u landed in the rounding slack above the cumulative sum
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}

fn ema(old: f64, sample: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * old + alpha * sample
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Competence {
    pub value: f64,
    pub last_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetenceTracker {
    alpha: f64,
    entries: Vec<Competence>,
}

impl CompetenceTracker {
    pub fn new(alpha: f64) -> Self {
        CompetenceTracker { alpha, entries: Vec::new() }
    }

    /// Starts tracking a goal at competence 0. Goal ids are dense.
    pub fn register(&mut self, goal: GoalId) {
        while self.entries.len() <= goal.0 as usize {
            self.entries.push(Competence::default());
        }
    }

    pub fn get(&self, goal: GoalId) -> Result<Competence> {
        self.entries
            .get(goal.0 as usize)
            .copied()
            .ok_or(Error::UnknownGoal(goal.0))
    }

    pub fn competence(&self, goal: GoalId) -> f64 {
        self.get(goal).map(|c| c.value).unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (GoalId, Competence)> + '_ {
        self.entries.iter().enumerate().map(|(i, c)| (GoalId(i as u32), *c))
    }

    /// Folds one epoch's success bit into the goal's competence and returns
    /// the resulting change.
    pub fn update(&mut self, goal: GoalId, success: bool) -> Result<f64> {
        let alpha = self.alpha;
        let entry = self
            .entries
            .get_mut(goal.0 as usize)
            .ok_or(Error::UnknownGoal(goal.0))?;
        let old = entry.value;
        entry.value = ema(old, if success { 1.0 } else { 0.0 }, alpha).clamp(0.0, 1.0);
        entry.last_delta = entry.value - old;
        Ok(entry.last_delta)
    }
}

/// Competence-based goal bandit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSelector {
    alpha: f64,
    temperature: f64,
    prior: f64,
    absolute: bool,
    values: Vec<(GoalId, f64)>,
}

impl GoalSelector {
    pub fn new(alpha: f64, temperature: f64, prior: f64, absolute: bool) -> Self {
        GoalSelector { alpha, temperature, prior, absolute, values: Vec::new() }
    }

    pub fn register(&mut self, goal: GoalId) {
        if !self.values.iter().any(|(g, _)| *g == goal) {
            self.values.push((goal, self.prior));
        }
    }

    pub fn values(&self) -> &[(GoalId, f64)] {
        &self.values
    }

    pub fn value(&self, goal: GoalId) -> Result<f64> {
        self.values
            .iter()
            .find(|(g, _)| *g == goal)
            .map(|(_, v)| *v)
            .ok_or(Error::UnknownGoal(goal.0))
    }

    pub fn max_value(&self) -> Option<f64> {
        self.values.iter().map(|(_, v)| *v).reduce(f64::max)
    }

    pub fn probabilities(&self) -> Result<Vec<f64>> {
        if self.values.is_empty() {
            return Err(Error::NoKnownGoals);
        }
        let vs: Vec<f64> = self.values.iter().map(|(_, v)| *v).collect();
        softmax_probabilities(&vs, self.temperature)
    }

    pub fn select(&self, rng: &mut impl Rng) -> Result<GoalId> {
        if self.values.is_empty() {
            return Err(Error::NoKnownGoals);
        }
        let vs: Vec<f64> = self.values.iter().map(|(_, v)| *v).collect();
        Ok(self.values[softmax_sample(&vs, self.temperature, rng)?].0)
    }

    pub fn update(&mut self, goal: GoalId, delta_c: f64) -> Result<f64> {
        let (alpha, absolute) = (self.alpha, self.absolute);
        let entry = self
            .values
            .iter_mut()
            .find(|(g, _)| *g == goal)
            .ok_or(Error::UnknownGoal(goal.0))?;
        let signal = if absolute { delta_c.abs() } else { delta_c };
        entry.1 = ema(entry.1, signal, alpha).max(-1.0);
        Ok(entry.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motivation {
    Discover,
    Exploit,
}

impl fmt::Display for Motivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Motivation::Discover => "discover",
            Motivation::Exploit => "exploit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotivationOutcome {
    /// A discovery epoch finished with this many new goals.
    Discovery { discoveries: u32, max_cbim: f64 },
    Exploit { max_cbim: f64 },
}

/// Two-armed bandit between goal discovery and competence improvement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotivationSelector {
    alpha: f64,
    temperature: f64,
    discover: f64,
    exploit: f64,
}

impl MotivationSelector {
    pub fn new(alpha: f64, temperature: f64) -> Self {
        MotivationSelector { alpha, temperature, discover: 0.0, exploit: 0.0 }
    }

    pub fn discover_value(&self) -> f64 {
        self.discover
    }

    pub fn exploit_value(&self) -> f64 {
        self.exploit
    }

    /// Probability of choosing to discover, given whether any goal is known.
    pub fn discover_probability(&self, has_goals: bool) -> f64 {
        if !has_goals {
            return 1.0;
        }
        softmax_probabilities(&[self.discover, self.exploit], self.temperature)
            .map(|p| p[0])
            .unwrap_or(0.5)
    }

    pub fn select(&self, has_goals: bool, rng: &mut impl Rng) -> Motivation {
        if !has_goals {
            return Motivation::Discover;
        }
        match softmax_sample(&[self.discover, self.exploit], self.temperature, rng) {
            Ok(0) => Motivation::Discover,
            _ => Motivation::Exploit,
        }
    }

    pub fn update(&mut self, outcome: MotivationOutcome) {
        let max_cbim = match outcome {
            MotivationOutcome::Discovery { discoveries, max_cbim } => {
                self.discover = ema(self.discover, f64::from(discoveries), self.alpha);
                max_cbim
            }
            MotivationOutcome::Exploit { max_cbim } => max_cbim,
        };
        self.exploit = max_cbim.max(0.0);
    }
}

/// Start state for a discovery epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StartStateId {
    Default,
    /// The scene right after the agent achieved this goal.
    After(GoalId),
}

impl fmt::Display for StartStateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartStateId::Default => f.write_str("default"),
            StartStateId::After(g) => write!(f, "after:{g}"),
        }
    }
}

impl FromStr for StartStateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "default" {
            return Ok(StartStateId::Default);
        }
        s.strip_prefix("after:")
            .and_then(|g| g.parse().ok())
            .map(|g| StartStateId::After(GoalId(g)))
            .ok_or_else(|| Error::UnknownStartState(s.to_string()))
    }
}

impl Serialize for StartStateId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StartStateId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Archive of exploration start states valued by discovery yield.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSelector {
    alpha: f64,
    temperature: f64,
    prior: f64,
    archive: Vec<(StartStateId, f64)>,
}

impl StateSelector {
    pub fn new(alpha: f64, temperature: f64, prior: f64) -> Self {
        StateSelector {
            alpha,
            temperature,
            prior,
            archive: vec![(StartStateId::Default, prior)],
        }
    }

    pub fn archive(&self) -> &[(StartStateId, f64)] {
        &self.archive
    }

    pub fn add(&mut self, start: StartStateId) {
        if !self.archive.iter().any(|(s, _)| *s == start) {
            self.archive.push((start, self.prior));
        }
    }

    pub fn value(&self, start: StartStateId) -> Result<f64> {
        self.archive
            .iter()
            .find(|(s, _)| *s == start)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::UnknownStartState(start.to_string()))
    }

    /// Softmax over the yields of archived start states for which
    /// `achievable` holds. `Default` is always a candidate.
    pub fn select(&self, achievable: impl Fn(StartStateId) -> bool, rng: &mut impl Rng) -> StartStateId {
        let candidates: Vec<(StartStateId, f64)> = self
            .archive
            .iter()
            .copied()
            .filter(|(s, _)| *s == StartStateId::Default || achievable(*s))
            .collect();
        let values: Vec<f64> = candidates.iter().map(|(_, v)| *v).collect();
        let i = softmax_sample(&values, self.temperature, rng).expect("default is always a candidate");
        candidates[i].0
    }

    pub fn update(&mut self, start: StartStateId, discoveries: u32) -> Result<f64> {
        let alpha = self.alpha;
        let entry = self
            .archive
            .iter_mut()
            .find(|(s, _)| *s == start)
            .ok_or_else(|| Error::UnknownStartState(start.to_string()))?;
        entry.1 = ema(entry.1, f64::from(discoveries), alpha);
        Ok(entry.1)
    }
}
