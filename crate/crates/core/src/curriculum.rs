//! Per-goal meta-policies that sequence sub-goals.
//!
//! Each known goal owns a tabular Q-function over [`AbstractState`]s (which
//! known goals currently hold, plus the gripper flag) and sub-goal actions.
//! One meta transition spans one trial. Exploration is ε-greedy with
//! ε = max(ε_min, 1 − competence on the target goal), so a goal whose
//! competence collapses automatically falls back to exploring sub-goals.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::PerceptVector;
use crate::goal_memory::{GoalId, GoalRepresentationMap};

/// Meta-level state. Bit `i` of `goals` is set when the post-change
/// condition of goal `i` currently holds. Newly discovered goals add bits
/// that start cleared, so existing states keep their identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct AbstractState {
    pub goals: u64,
    pub gripper_occupied: bool,
}

impl AbstractState {
    pub fn holds(&self, goal: GoalId) -> bool {
        goal.0 < 64 && self.goals & (1u64 << goal.0) != 0
    }

    pub fn with(mut self, goal: GoalId, value: bool) -> Self {
        if value {
            self.goals |= 1u64 << goal.0;
        } else {
            self.goals &= !(1u64 << goal.0);
        }
        self
    }

    /// Bit vector over `known` goals followed by the gripper flag.
    pub fn to_bits(&self, known: usize) -> Vec<bool> {
        (0..known as u32)
            .map(|g| self.holds(GoalId(g)))
            .chain(std::iter::once(self.gripper_occupied))
            .collect()
    }
}

pub fn encode_abstract_state(percept: &PerceptVector, map: &GoalRepresentationMap) -> AbstractState {
    let goals = map
        .records()
        .iter()
        .filter(|r| {
            r.signature
                .post_state()
                .all(|(p, value)| percept.flag(p) == Some(value))
        })
        .fold(0u64, |acc, r| acc | (1u64 << r.goal_id.0));
    AbstractState { goals, gripper_occupied: percept.gripper_occupied }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_min: f64,
    /// Replay each epoch's transitions once more, last to first, when it ends.
    pub replay: bool,
}

impl Default for MetaParams {
    fn default() -> Self {
        MetaParams { alpha: 0.2, gamma: 0.9, epsilon_min: 0.05, replay: true }
    }
}

/// One meta-level step: a trial pursuing sub-goal `subgoal` from `state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaTransition {
    pub state: AbstractState,
    pub subgoal: GoalId,
    pub reward: f64,
    pub next: AbstractState,
    pub terminal: bool,
}

pub fn exploration_rate(competence: f64, epsilon_min: f64) -> f64 {
    (1.0 - competence).clamp(0.0, 1.0).max(epsilon_min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaPolicy {
    target: GoalId,
    params: MetaParams,
    actions: Vec<GoalId>,
    q: HashMap<(AbstractState, GoalId), f64>,
    /// Observed successor counts per (state, sub-goal), for plan rollouts.
    successors: HashMap<(AbstractState, GoalId), Vec<(AbstractState, u32)>>,
}

impl MetaPolicy {
    pub fn new(target: GoalId, params: MetaParams, actions: impl IntoIterator<Item = GoalId>) -> Self {
        MetaPolicy {
            target,
            params,
            actions: actions.into_iter().collect(),
            q: HashMap::new(),
            successors: HashMap::new(),
        }
    }

    pub fn target(&self) -> GoalId {
        self.target
    }

    pub fn actions(&self) -> &[GoalId] {
        &self.actions
    }

    /// Adds a sub-goal column. Its Q-values start at 0.
    pub fn add_action(&mut self, goal: GoalId) {
        if !self.actions.contains(&goal) {
            self.actions.push(goal);
        }
    }

    pub fn q(&self, s: AbstractState, a: GoalId) -> f64 {
        self.q.get(&(s, a)).copied().unwrap_or(0.0)
    }

    fn max_q(&self, s: AbstractState) -> f64 {
        self.actions
            .iter()
            .map(|&a| self.q(s, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn greedy_set(&self, s: AbstractState) -> Vec<GoalId> {
        let best = self.max_q(s);
        self.actions.iter().copied().filter(|&a| self.q(s, a) == best).collect()
    }

    /// ε-greedy sub-goal choice with ε = max(ε_min, 1 − competence).
    pub fn select_subgoal(&self, s: AbstractState, competence: f64, rng: &mut impl Rng) -> GoalId {
        self.select_with_epsilon(s, exploration_rate(competence, self.params.epsilon_min), rng)
    }

    pub fn select_with_epsilon(&self, s: AbstractState, epsilon: f64, rng: &mut impl Rng) -> GoalId {
        assert!(!self.actions.is_empty(), "meta-policy without sub-goals");
        if rng.gen::<f64>() < epsilon {
            return *self.actions.choose(rng).expect("non-empty");
        }
        *self.greedy_set(s).choose(rng).expect("non-empty")
    }

    fn backup(&mut self, s: AbstractState, a: GoalId, r: f64, s_next: AbstractState, terminal: bool) -> f64 {
        let bootstrap = if terminal { 0.0 } else { self.max_q(s_next) };
        let q = self.q(s, a);
        let updated = q + self.params.alpha * (r + self.params.gamma * bootstrap - q);
        self.q.insert((s, a), updated);
        updated
    }

    /// One-step Q-learning backup.
    pub fn q_update(&mut self, s: AbstractState, a: GoalId, r: f64, s_next: AbstractState, terminal: bool) -> f64 {
        let updated = self.backup(s, a, r, s_next, terminal);
        let seen = self.successors.entry((s, a)).or_default();
        match seen.iter_mut().find(|(t, _)| *t == s_next) {
            Some((_, n)) => *n += 1,
            None => seen.push((s_next, 1)),
        }
        updated
    }

    /// Backs up an already-learned episode again from its last step to its
    /// first, so a reward at the end reaches the first sub-goal in one pass.
    /// Successor statistics are left alone.
    pub fn replay_backward(&mut self, episode: &[MetaTransition]) {
        for t in episode.iter().rev() {
            self.backup(t.state, t.subgoal, t.reward, t.next, t.terminal);
        }
    }

    fn likely_successor(&self, s: AbstractState, a: GoalId) -> Option<AbstractState> {
        self.successors
            .get(&(s, a))?
            .iter()
            .max_by(|x, y| x.1.cmp(&y.1).then(y.0.cmp(&x.0)))
            .map(|(t, _)| *t)
    }

    /// Greedy rollout over the abstract transitions observed so far. Stops
    /// when the target is chosen, when no sub-goal has positive value, or
    /// when the successor of the chosen sub-goal is unknown.
    pub fn greedy_plan(&self, s: AbstractState, max_len: usize) -> Vec<GoalId> {
        let mut plan = Vec::new();
        let mut state = s;
        while plan.len() < max_len.max(1) {
            let best = self.max_q(state);
            if !(best > 0.0) {
                break;
            }
            let a = *self
                .actions
                .iter()
                .find(|&&a| self.q(state, a) == best)
                .expect("max exists");
            plan.push(a);
            if a == self.target {
                break;
            }
            match self.likely_successor(state, a) {
                Some(next) => state = next,
                None => break,
            }
        }
        plan
    }

    /// Text dump, one `state subgoal value` line per stored Q-value.
    pub fn dump(&self) -> String {
        let mut rows: Vec<_> = self.q.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::new();
        for ((s, a), v) in rows {
            let _ = writeln!(
                out,
                "target={} state={:#x} gripper={} subgoal={} q={:.9}",
                self.target, s.goals, u8::from(s.gripper_occupied), a, v
            );
        }
        out
    }
}
