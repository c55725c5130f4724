//! Frozen abstraction of a phase's dependency graph: each scenario goal is
//! a sub-goal action whose outcome is deterministic. Used to train
//! meta-policies in isolation and to compute their optimal plans by value
//! iteration.

use std::collections::{BTreeMap, BTreeSet};

use oel_core::curriculum::{exploration_rate, AbstractState, MetaParams, MetaPolicy, MetaTransition};
use oel_core::scenario::{ObjectKind, PhaseSpec};
use oel_core::{GoalId, Predicate, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Meta steps allowed per episode, matching the agent's trial budget.
pub const EPISODE_LEN: usize = 8;

pub struct FrozenDag {
    predicates: Vec<Predicate>,
    phase: PhaseSpec,
    active: BTreeSet<Predicate>,
}

impl FrozenDag {
    pub fn new(config: &ScenarioConfig, phase: u32) -> Self {
        let spec = config.phase(phase).expect("phase exists").clone();
        let predicates: Vec<Predicate> = config.goals.iter().map(|g| g.predicate.clone()).collect();
        let active = predicates
            .iter()
            .filter(|p| match p {
                Predicate::Lit(id) | Predicate::InBox(id) => spec.is_active(id),
                Predicate::Held | Predicate::Visible => config
                    .objects
                    .iter()
                    .any(|o| o.kind == ObjectKind::Cylinder && spec.is_active(&o.id)),
            })
            .cloned()
            .collect();
        FrozenDag { predicates, phase: spec, active }
    }

    pub fn goals(&self) -> impl Iterator<Item = GoalId> {
        (0..self.predicates.len() as u32).map(GoalId)
    }

    fn index(&self, p: &Predicate) -> Option<GoalId> {
        self.predicates.iter().position(|q| q == p).map(|i| GoalId(i as u32))
    }

    fn holds(&self, s: AbstractState, p: &Predicate) -> bool {
        self.index(p).is_some_and(|g| s.holds(g))
    }

    /// Successor after pursuing `goal` from `s`, and whether it was achieved.
    /// A goal already holding cannot be achieved again.
    pub fn step(&self, s: AbstractState, goal: GoalId) -> (AbstractState, bool) {
        let p = &self.predicates[goal.0 as usize];
        let possible = self.active.contains(p)
            && !s.holds(goal)
            && self.phase.prerequisites(p).all(|q| self.holds(s, q));
        if !possible {
            return (s, false);
        }
        let mut next = s.with(goal, true);
        for q in self.phase.excluded_by(p) {
            if let Some(g) = self.index(q) {
                next = next.with(g, false);
            }
        }
        // Placing releases the cylinder; grasping lifts it out of any box.
        for (i, q) in self.predicates.iter().enumerate() {
            let clear = match (p, q) {
                (Predicate::InBox(_), Predicate::Held) => true,
                (Predicate::InBox(a), Predicate::InBox(b)) => a != b,
                (Predicate::Held, Predicate::InBox(_)) => true,
                _ => false,
            };
            if clear {
                next = next.with(GoalId(i as u32), false);
            }
        }
        if let Some(held) = self.index(&Predicate::Held) {
            next.gripper_occupied = next.holds(held);
        }
        (next, true)
    }

    pub fn start(&self) -> AbstractState {
        AbstractState::default()
    }

    fn reachable(&self) -> Vec<AbstractState> {
        let mut seen = BTreeSet::from([self.start()]);
        let mut frontier = vec![self.start()];
        while let Some(s) = frontier.pop() {
            for g in self.goals() {
                let (next, _) = self.step(s, g);
                if seen.insert(next) {
                    frontier.push(next);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Optimal action values for reaching `target`, by value iteration.
    pub fn value_iteration(&self, target: GoalId, gamma: f64) -> BTreeMap<(AbstractState, GoalId), f64> {
        let states = self.reachable();
        let mut v: BTreeMap<AbstractState, f64> = states.iter().map(|&s| (s, 0.0)).collect();
        let mut q = BTreeMap::new();
        for _ in 0..500 {
            let mut delta = 0.0f64;
            for &s in &states {
                let mut best = 0.0f64;
                for a in self.goals() {
                    let (next, ok) = self.step(s, a);
                    let value = if ok && a == target { 1.0 } else { gamma * v[&next] };
                    q.insert((s, a), value);
                    best = best.max(value);
                }
                delta = delta.max((best - v[&s]).abs());
                v.insert(s, best);
            }
            if delta < 1e-15 {
                break;
            }
        }
        q
    }

    /// Greedy sub-goal sequence under the optimal values. Empty when the
    /// target is unreachable. Panics if the optimum is not unique.
    pub fn optimal_plan(&self, target: GoalId, gamma: f64) -> Vec<GoalId> {
        let q = self.value_iteration(target, gamma);
        let mut s = self.start();
        let mut plan = Vec::new();
        while plan.len() < EPISODE_LEN {
            let mut ranked: Vec<(GoalId, f64)> = self.goals().map(|a| (a, q[&(s, a)])).collect();
            ranked.sort_by(|x, y| y.1.total_cmp(&x.1));
            let (a, best) = ranked[0];
            if best <= 0.0 {
                break;
            }
            assert!(best - ranked[1].1 > 1e-9, "optimal plan is ambiguous at {s:?}");
            plan.push(a);
            if a == target {
                break;
            }
            s = self.step(s, a).0;
        }
        plan
    }

    /// Trains a meta-policy for `target` the way the agent's exploitation
    /// epochs do, with sub-goals drawn uniformly (the agent's exploration
    /// rule at zero competence) from the initial state. Q-learning is
    /// off-policy, so the greedy plan it converges to does not depend on
    /// the behaviour.
    pub fn train(&self, target: GoalId, params: MetaParams, episodes: usize, seed: u64) -> MetaPolicy {
        let mut policy = MetaPolicy::new(target, params, self.goals());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let epsilon = exploration_rate(0.0, params.epsilon_min);
        for _ in 0..episodes {
            let mut s = self.start();
            let mut episode = Vec::new();
            for _ in 0..EPISODE_LEN {
                let a = policy.select_with_epsilon(s, epsilon, &mut rng);
                let (next, ok) = self.step(s, a);
                let success = ok && a == target;
                let reward = if success { 1.0 } else { 0.0 };
                policy.q_update(s, a, reward, next, success);
                episode.push(MetaTransition { state: s, subgoal: a, reward, next, terminal: success });
                s = next;
                if success {
                    break;
                }
            }
            if params.replay {
                policy.replay_backward(&episode);
            }
        }
        policy
    }
}
