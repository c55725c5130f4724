//! The epoch loop tying discovery, motivation, curricula and experts
//! together, and the two ablated baselines.
//!
//! | variant  | motivation selector | state selector | deliberate discovery |
//! |----------|---------------------|----------------|----------------------|
//! | `Hgrail` | yes                 | yes            | from selected start  |
//! | `SGd`    | yes                 | no             | from default start   |
//! | `RndGd`  | no                  | no             | never                |
//!
//! Every variant adds goals incidentally: all events observed in any epoch
//! pass through [`GoalRepresentationMap::discover`].

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curriculum::{encode_abstract_state, AbstractState, MetaParams, MetaPolicy, MetaTransition};
use crate::env::{EnvState, Tabletop};
use crate::error::{Error, Result};
use crate::experts::{candidates, exploratory_action, Expert, TrajectoryBuffer};
use crate::goal_memory::{Event, GoalId, GoalRepresentationMap, Transition};
use crate::motivation::{
    CompetenceTracker, GoalSelector, Motivation, MotivationOutcome, MotivationSelector, StartStateId, StateSelector,
};
use crate::scenario::PhaseId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "hgrail")]
    Hgrail,
    #[serde(rename = "rnd-gd")]
    RndGd,
    #[serde(rename = "s-gd")]
    SGd,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Hgrail, Variant::SGd, Variant::RndGd];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Hgrail => "hgrail",
            Variant::RndGd => "rnd-gd",
            Variant::SGd => "s-gd",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "hgrail" | "h-grail" => Ok(Variant::Hgrail),
            "rnd-gd" | "rndgd" => Ok(Variant::RndGd),
            "s-gd" | "sgd" => Ok(Variant::SGd),
            other => Err(format!("unknown variant `{other}` (expected hgrail, rnd-gd or s-gd)")),
        }
    }
}

/// Every tunable of the agent. Defaults reproduce the reference protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentParams {
    pub trials_per_epoch: u32,
    pub steps_per_trial: u32,
    pub competence_alpha: f64,
    pub goal_alpha: f64,
    pub goal_temperature: f64,
    pub goal_prior: f64,
    /// Drive goal selection with |ΔC| instead of ΔC.
    pub absolute_cbim: bool,
    pub motivation_alpha: f64,
    pub motivation_temperature: f64,
    pub state_alpha: f64,
    pub state_temperature: f64,
    pub state_prior: f64,
    pub meta: MetaParams,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epsilon_low: f64,
    /// Expert utilities this close to the best one count as ties.
    pub tie_tolerance: f64,
    /// Expert step-size multiplier for samples from failed trials.
    pub failure_weight: f64,
    /// A start "after G" is offered to the state selector once C^G reaches this.
    pub achievable_competence: f64,
    /// Trials a discovery epoch may spend reaching its start state.
    pub realization_trials: u32,
    /// Whether realization trials train experts and the start goal's
    /// meta-policy like exploitation trials do.
    pub realization_learns: bool,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            trials_per_epoch: 8,
            steps_per_trial: 70,
            competence_alpha: 0.1,
            goal_alpha: 0.2,
            goal_temperature: 0.05,
            goal_prior: 0.5,
            absolute_cbim: false,
            motivation_alpha: 0.1,
            motivation_temperature: 0.05,
            state_alpha: 0.1,
            state_temperature: 0.05,
            state_prior: 0.5,
            meta: MetaParams::default(),
            hidden_units: 16,
            learning_rate: 0.003,
            epsilon_low: 0.1,
            tie_tolerance: 0.003,
            failure_weight: 0.5,
            achievable_competence: 0.5,
            realization_trials: 4,
            realization_learns: true,
        }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(crate::error::ConfigError::Invalid(what.to_string())));
        if self.trials_per_epoch == 0 || self.steps_per_trial == 0 {
            return bad("trials_per_epoch and steps_per_trial must be positive");
        }
        if self.hidden_units == 0 {
            return bad("hidden_units must be positive");
        }
        let rates = [
            self.competence_alpha,
            self.goal_alpha,
            self.motivation_alpha,
            self.state_alpha,
            self.meta.alpha,
        ];
        if rates.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return bad("learning rates must lie in (0, 1]");
        }
        let temps = [self.goal_temperature, self.motivation_temperature, self.state_temperature];
        if temps.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("temperatures must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_low) || !(0.0..=1.0).contains(&self.meta.epsilon_min) {
            return bad("exploration rates must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.tie_tolerance >= 0.0) || !(self.failure_weight >= 0.0 && self.failure_weight.is_finite()) {
            return bad("tie_tolerance and failure_weight must be non-negative");
        }
        if !(0.0..1.0).contains(&self.meta.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        Ok(())
    }
}

/// How often each selector was consulted. Ablated components stay at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub motivation_selects: u64,
    pub motivation_updates: u64,
    pub state_selects: u64,
    pub state_updates: u64,
    pub goal_selects: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Abstract state at the start of the trial.
    pub state: AbstractState,
    pub subgoal: Option<GoalId>,
    pub steps: u32,
    pub subgoal_matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub phase: PhaseId,
    pub motivation: Motivation,
    pub goal: Option<GoalId>,
    pub start_state: Option<StartStateId>,
    pub start_realized: Option<bool>,
    pub trials: Vec<TrialRecord>,
    pub discovered: Vec<GoalId>,
    /// Whether the exploited goal was matched; `None` for discovery epochs.
    pub success: Option<bool>,
    pub competence: Vec<f64>,
    pub cbim: Vec<f64>,
}

impl EpochRecord {
    pub fn trials_used(&self) -> usize {
        self.trials.len()
    }
}

struct TrialOutcome {
    steps: u32,
    subgoal_matched: bool,
    target_matched: bool,
    events: Vec<Event>,
    buffer: TrajectoryBuffer,
}

/// What a trial is driven by and when it stops.
struct TrialPlan<'a> {
    expert: Option<&'a Expert>,
    subgoal: Option<GoalId>,
    target: Option<GoalId>,
    epsilon: f64,
}

/// Runs one trial from the home pose. With an expert the trial stops once
/// the sub-goal or the target is matched; without one it takes random
/// actions for the whole step budget.
fn run_trial(
    tabletop: &Tabletop,
    env: &mut EnvState,
    goals: &GoalRepresentationMap,
    plan: TrialPlan<'_>,
    max_steps: u32,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome> {
    tabletop.return_home(env);
    let mut percept = tabletop.percept(env);
    let mut out = TrialOutcome {
        steps: 0,
        subgoal_matched: false,
        target_matched: false,
        events: Vec::new(),
        buffer: TrajectoryBuffer::new(max_steps as usize),
    };
    let actions = candidates();
    while out.steps < max_steps {
        let features = percept.features();
        let a = match plan.expert {
            Some(expert) => expert.select_action(&features, plan.epsilon, rng),
            None => exploratory_action(rng),
        };
        out.buffer.push(features, a);
        let step = tabletop.step(env, actions[a]);
        out.steps += 1;
        percept = step.percept;
        if step.events.is_empty() {
            continue;
        }
        if let Some(sub) = plan.subgoal {
            out.subgoal_matched |= goals.match_goal(sub, &step.events)?;
        }
        if let Some(target) = plan.target {
            out.target_matched |= goals.match_goal(target, &step.events)?;
        }
        out.events.extend(step.events);
        if plan.expert.is_some() && (out.subgoal_matched || out.target_matched) {
            break;
        }
    }
    out.buffer.set_outcome(out.subgoal_matched);
    Ok(out)
}

/// Scenario goal `i` counts as the discovered goal whose signature first
/// contains the rising edge of its predicate.
pub fn scenario_goal_ids(tabletop: &Tabletop, goals: &GoalRepresentationMap) -> Vec<Option<GoalId>> {
    tabletop
        .config()
        .goals
        .iter()
        .map(|g| {
            let edge = Transition::rising(g.predicate.clone());
            goals
                .records()
                .iter()
                .find(|r| r.signature.transitions().contains(&edge))
                .map(|r| r.goal_id)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Agent {
    variant: Variant,
    params: AgentParams,
    feature_dim: usize,
    goals: GoalRepresentationMap,
    competence: CompetenceTracker,
    goal_selector: GoalSelector,
    motivation: Option<MotivationSelector>,
    state_selector: Option<StateSelector>,
    policies: Vec<MetaPolicy>,
    experts: Vec<Expert>,
    rng: ChaCha8Rng,
    seed: u64,
    counters: Counters,
}

impl Agent {
    pub fn new(variant: Variant, params: AgentParams, tabletop: &Tabletop, seed: u64) -> Result<Self> {
        params.validate()?;
        let layout = tabletop.layout();
        let feature_dim = layout.objects.len() + layout.predicates.len();
        let motivation = (variant != Variant::RndGd)
            .then(|| MotivationSelector::new(params.motivation_alpha, params.motivation_temperature));
        let state_selector = (variant == Variant::Hgrail)
            .then(|| StateSelector::new(params.state_alpha, params.state_temperature, params.state_prior));
        Ok(Agent {
            variant,
            feature_dim,
            goals: GoalRepresentationMap::new(),
            competence: CompetenceTracker::new(params.competence_alpha),
            goal_selector: GoalSelector::new(
                params.goal_alpha,
                params.goal_temperature,
                params.goal_prior,
                params.absolute_cbim,
            ),
            motivation,
            state_selector,
            policies: Vec::new(),
            experts: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            counters: Counters::default(),
            params,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn goals(&self) -> &GoalRepresentationMap {
        &self.goals
    }

    pub fn competence(&self) -> &CompetenceTracker {
        &self.competence
    }

    pub fn goal_selector(&self) -> &GoalSelector {
        &self.goal_selector
    }

    pub fn motivation_selector(&self) -> Option<&MotivationSelector> {
        self.motivation.as_ref()
    }

    pub fn state_selector(&self) -> Option<&StateSelector> {
        self.state_selector.as_ref()
    }

    pub fn policy(&self, goal: GoalId) -> Result<&MetaPolicy> {
        self.policies.get(goal.0 as usize).ok_or(Error::UnknownGoal(goal.0))
    }

    pub fn expert(&self, goal: GoalId) -> Result<&Expert> {
        self.experts.get(goal.0 as usize).ok_or(Error::UnknownGoal(goal.0))
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    fn register_goal(&mut self, goal: GoalId) {
        self.competence.register(goal);
        self.goal_selector.register(goal);
        for policy in &mut self.policies {
            policy.add_action(goal);
        }
        self.policies
            .push(MetaPolicy::new(goal, self.params.meta, self.goals.ids()));
        self.experts.push(Expert::new(
            goal,
            self.feature_dim,
            self.params.hidden_units,
            self.params.learning_rate,
            self.params.epsilon_low,
            &mut self.rng,
        )
        .with_tie_tolerance(self.params.tie_tolerance)
        .with_failure_weight(self.params.failure_weight));
        if let Some(states) = &mut self.state_selector {
            states.add(StartStateId::After(goal));
        }
    }

    /// Registers goals new among the trial's events.
    fn absorb(&mut self, out: &TrialOutcome, epoch: u32, context: StartStateId) -> Vec<GoalId> {
        let added = self.goals.discover(&out.events, epoch, context);
        for &g in &added {
            self.register_goal(g);
        }
        added
    }

    fn snapshot(&self) -> (Vec<f64>, Vec<f64>) {
        let competence = self.goals.ids().map(|g| self.competence.competence(g)).collect();
        let cbim = self.goal_selector.values().iter().map(|(_, v)| *v).collect();
        (competence, cbim)
    }

    fn max_cbim(&self) -> f64 {
        self.goal_selector.max_value().unwrap_or(0.0)
    }

    /// One epoch from the initial scene of `phase`.
    pub fn run_epoch(&mut self, tabletop: &Tabletop, epoch: u32, phase: PhaseId) -> Result<EpochRecord> {
        let mut env = tabletop.init_env(phase, self.seed)?;
        let has_goals = !self.goals.is_empty();
        let motivation = match &self.motivation {
            Some(m) => {
                self.counters.motivation_selects += 1;
                m.select(has_goals, &mut self.rng)
            }
            None => Motivation::Exploit,
        };
        match motivation {
            Motivation::Discover => self.discovery_epoch(tabletop, &mut env, epoch),
            Motivation::Exploit if has_goals => {
                self.counters.goal_selects += 1;
                let goal = self.goal_selector.select(&mut self.rng)?;
                self.exploit_epoch(tabletop, &mut env, epoch, goal)
            }
            Motivation::Exploit => self.random_epoch(tabletop, &mut env, epoch),
        }
    }

    fn exploit_epoch(&mut self, tabletop: &Tabletop, env: &mut EnvState, epoch: u32, goal: GoalId) -> Result<EpochRecord> {
        let p = self.params.clone();
        let competence = self.competence.competence(goal);
        let mut trials = Vec::new();
        let mut discovered = Vec::new();
        let mut success = false;
        let mut episode = Vec::new();
        // The epoch's trial budget truncates the meta episode; only reaching
        // the target ends it, so the last trial still bootstraps.
        for _ in 0..p.trials_per_epoch {
            let s = encode_abstract_state(&tabletop.percept(env), &self.goals);
            let sub = self.policies[goal.0 as usize].select_subgoal(s, competence, &mut self.rng);
            if s.holds(sub) {
                // nothing to achieve: the sub-goal's end state is already in place
                self.policies[goal.0 as usize].q_update(s, sub, 0.0, s, false);
                episode.push(MetaTransition { state: s, subgoal: sub, reward: 0.0, next: s, terminal: false });
                trials.push(TrialRecord { state: s, subgoal: Some(sub), steps: 0, subgoal_matched: false });
                continue;
            }
            let plan = TrialPlan {
                expert: Some(&self.experts[sub.0 as usize]),
                subgoal: Some(sub),
                target: Some(goal),
                epsilon: p.epsilon_low,
            };
            let out = run_trial(tabletop, env, &self.goals, plan, p.steps_per_trial, &mut self.rng)?;
            discovered.extend(self.absorb(&out, epoch, StartStateId::Default));
            self.experts[sub.0 as usize].train(&out.buffer);
            let s_next = encode_abstract_state(&tabletop.percept(env), &self.goals);
            let reward = if out.target_matched { 1.0 } else { 0.0 };
            self.policies[goal.0 as usize].q_update(s, sub, reward, s_next, out.target_matched);
            episode.push(MetaTransition { state: s, subgoal: sub, reward, next: s_next, terminal: out.target_matched });
            trials.push(TrialRecord { state: s, subgoal: Some(sub), steps: out.steps, subgoal_matched: out.subgoal_matched });
            if out.target_matched {
                success = true;
                break;
            }
        }
        if p.meta.replay {
            self.policies[goal.0 as usize].replay_backward(&episode);
        }
        let delta = self.competence.update(goal, success)?;
        self.goal_selector.update(goal, delta)?;
        let max_cbim = self.max_cbim();
        if let Some(m) = &mut self.motivation {
            m.update(MotivationOutcome::Exploit { max_cbim });
            self.counters.motivation_updates += 1;
        }
        let (competence, cbim) = self.snapshot();
        Ok(EpochRecord {
            epoch,
            phase: env.phase,
            motivation: Motivation::Exploit,
            goal: Some(goal),
            start_state: None,
            start_realized: None,
            trials,
            discovered,
            success: Some(success),
            competence,
            cbim,
        })
    }

    /// Trials of uniformly random actions; the only source of goals for an
    /// agent without deliberate discovery that knows nothing yet.
    fn random_epoch(&mut self, tabletop: &Tabletop, env: &mut EnvState, epoch: u32) -> Result<EpochRecord> {
        let mut trials = Vec::new();
        let mut discovered = Vec::new();
        for _ in 0..self.params.trials_per_epoch {
            let state = encode_abstract_state(&tabletop.percept(env), &self.goals);
            let out = self.explore_trial(tabletop, env)?;
            discovered.extend(self.absorb(&out, epoch, StartStateId::Default));
            trials.push(TrialRecord { state, subgoal: None, steps: out.steps, subgoal_matched: false });
        }
        let (competence, cbim) = self.snapshot();
        Ok(EpochRecord {
            epoch,
            phase: env.phase,
            motivation: Motivation::Exploit,
            goal: None,
            start_state: None,
            start_realized: None,
            trials,
            discovered,
            success: None,
            competence,
            cbim,
        })
    }

    fn explore_trial(&mut self, tabletop: &Tabletop, env: &mut EnvState) -> Result<TrialOutcome> {
        let plan = TrialPlan { expert: None, subgoal: None, target: None, epsilon: 1.0 };
        run_trial(tabletop, env, &self.goals, plan, self.params.steps_per_trial, &mut self.rng)
    }

    fn discovery_epoch(&mut self, tabletop: &Tabletop, env: &mut EnvState, epoch: u32) -> Result<EpochRecord> {
        let p = self.params.clone();
        let start = match &self.state_selector {
            Some(states) => {
                self.counters.state_selects += 1;
                let competence = &self.competence;
                let threshold = p.achievable_competence;
                states.select(
                    |s| match s {
                        StartStateId::Default => true,
                        StartStateId::After(g) => competence.competence(g) >= threshold,
                    },
                    &mut self.rng,
                )
            }
            None => StartStateId::Default,
        };

        let mut trials = Vec::new();
        let mut discovered = Vec::new();
        let mut realized = None;
        if let StartStateId::After(target) = start {
            let budget = p.realization_trials.min(p.trials_per_epoch);
            let mut reached = false;
            let mut episode = Vec::new();
            for _ in 0..budget {
                let s = encode_abstract_state(&tabletop.percept(env), &self.goals);
                if s.holds(target) {
                    reached = true;
                    break;
                }
                let sub = self.policies[target.0 as usize].select_with_epsilon(s, p.meta.epsilon_min, &mut self.rng);
                if s.holds(sub) {
                    trials.push(TrialRecord { state: s, subgoal: Some(sub), steps: 0, subgoal_matched: false });
                    continue;
                }
                let plan = TrialPlan {
                    expert: Some(&self.experts[sub.0 as usize]),
                    subgoal: Some(sub),
                    target: Some(target),
                    epsilon: p.epsilon_low,
                };
                let out = run_trial(tabletop, env, &self.goals, plan, p.steps_per_trial, &mut self.rng)?;
                discovered.extend(self.absorb(&out, epoch, start));
                if p.realization_learns {
                    self.experts[sub.0 as usize].train(&out.buffer);
                    let s_next = encode_abstract_state(&tabletop.percept(env), &self.goals);
                    let reward = if out.target_matched { 1.0 } else { 0.0 };
                    self.policies[target.0 as usize].q_update(s, sub, reward, s_next, out.target_matched);
                    episode.push(MetaTransition { state: s, subgoal: sub, reward, next: s_next, terminal: out.target_matched });
                }
                trials.push(TrialRecord { state: s, subgoal: Some(sub), steps: out.steps, subgoal_matched: out.subgoal_matched });
                if out.target_matched {
                    reached = true;
                    break;
                }
            }
            if p.meta.replay {
                self.policies[target.0 as usize].replay_backward(&episode);
            }
            if !reached {
                *env = tabletop.init_env(env.phase, self.seed)?;
            }
            realized = Some(reached);
        }

        while (trials.len() as u32) < p.trials_per_epoch {
            let state = encode_abstract_state(&tabletop.percept(env), &self.goals);
            let out = self.explore_trial(tabletop, env)?;
            discovered.extend(self.absorb(&out, epoch, start));
            trials.push(TrialRecord { state, subgoal: None, steps: out.steps, subgoal_matched: false });
        }

        let count = discovered.len() as u32;
        if let Some(states) = &mut self.state_selector {
            states.update(start, count)?;
            self.counters.state_updates += 1;
        }
        let max_cbim = self.max_cbim();
        if let Some(m) = &mut self.motivation {
            m.update(MotivationOutcome::Discovery { discoveries: count, max_cbim });
            self.counters.motivation_updates += 1;
        }
        let (competence, cbim) = self.snapshot();
        Ok(EpochRecord {
            epoch,
            phase: env.phase,
            motivation: Motivation::Discover,
            goal: None,
            start_state: Some(start),
            start_realized: realized,
            trials,
            discovered,
            success: None,
            competence,
            cbim,
        })
    }

    /// Frozen-policy test of every known goal: one epoch per goal from a
    /// fresh scene, meta exploration at ε_min, greedy experts, no learning
    /// and no discovery. The agent is not modified.
    pub fn evaluate_greedy(&self, tabletop: &Tabletop, phase: PhaseId, seed: u64) -> Result<Vec<(GoalId, bool)>> {
        let p = &self.params;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut results = Vec::with_capacity(self.goals.len());
        for goal in self.goals.ids() {
            let mut env = tabletop.init_env(phase, seed)?;
            let policy = &self.policies[goal.0 as usize];
            let mut success = false;
            for _ in 0..p.trials_per_epoch {
                let s = encode_abstract_state(&tabletop.percept(&env), &self.goals);
                let sub = policy.select_with_epsilon(s, p.meta.epsilon_min, &mut rng);
                if s.holds(sub) {
                    continue;
                }
                let plan = TrialPlan {
                    expert: Some(&self.experts[sub.0 as usize]),
                    subgoal: Some(sub),
                    target: Some(goal),
                    epsilon: 0.0,
                    };
                if run_trial(tabletop, &mut env, &self.goals, plan, p.steps_per_trial, &mut rng)?.target_matched {
                    success = true;
                    break;
                }
            }
            results.push((goal, success));
        }
        Ok(results)
    }

    /// Frozen evaluation mapped onto the scenario's goal list; goals not yet
    /// discovered count as failures.
    pub fn evaluate_scenario_goals(&self, tabletop: &Tabletop, phase: PhaseId, seed: u64) -> Result<Vec<bool>> {
        let results = self.evaluate_greedy(tabletop, phase, seed)?;
        Ok(scenario_goal_ids(tabletop, &self.goals)
            .into_iter()
            .map(|id| id.is_some_and(|g| results.iter().any(|&(r, ok)| r == g && ok)))
            .collect())
    }

    pub fn dump_q_tables(&self) -> String {
        self.policies.iter().map(MetaPolicy::dump).collect()
    }
}
