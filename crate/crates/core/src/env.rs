//! Discrete-time tabletop simulation.
//!
//! The arm moves a fixed distance per step in one of eight compass
//! headings, can be raised or lowered, and can open or close its gripper.
//! Buttons light when pressed from the low position; the cylinder can be
//! grasped from the table or a box and released into placement boxes. Which
//! interactions are possible depends on the active phase's dependency graph.
//! The simulation itself has no stochastic element.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error, Result};
use crate::goal_memory::{Event, EventList, Signature, Transition};
use crate::scenario::{
    CylinderStart, ObjectId, ObjectKind, PhaseId, Point, Predicate, ScenarioConfig,
};

/// Distance reported for objects absent from the current phase.
pub const ABSENT_DISTANCE_CM: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Heading {
    pub const ALL: [Heading; 8] = [
        Heading::N,
        Heading::NE,
        Heading::E,
        Heading::SE,
        Heading::S,
        Heading::SW,
        Heading::W,
        Heading::NW,
    ];

    /// Unit vector of the heading (north is +y).
    pub fn unit(self) -> (f64, f64) {
        let d = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Heading::N => (0.0, 1.0),
            Heading::NE => (d, d),
            Heading::E => (1.0, 0.0),
            Heading::SE => (d, -d),
            Heading::S => (0.0, -1.0),
            Heading::SW => (-d, -d),
            Heading::W => (-1.0, 0.0),
            Heading::NW => (-d, d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Vertical {
    Raise,
    Lower,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GripperCmd {
    Open,
    Close,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub heading: Option<Heading>,
    pub vertical: Vertical,
    pub gripper: GripperCmd,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.heading {
            Some(h) => write!(f, "({h:?}, {:?}, {:?})", self.vertical, self.gripper),
            None => write!(f, "(-, {:?}, {:?})", self.vertical, self.gripper),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Height {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gripper {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CylinderLocation {
    OnTable(Point),
    InBox(ObjectId),
    Held,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub effector: Point,
    pub height: Height,
    pub gripper: Gripper,
    pub holding: Option<ObjectId>,
    /// Lit state per button, in configuration order.
    pub button_lit: Vec<bool>,
    pub cylinder: CylinderLocation,
    pub phase: PhaseId,
    pub step_count: u32,
    pub seed: u64,
}

/// Names of the percept's entries; shared by all percepts of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptLayout {
    pub objects: Vec<ObjectId>,
    pub predicates: Vec<Predicate>,
    pub diagonal_cm: f64,
}

/// What the robot observes after each step.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptVector {
    /// Straight-line effector-to-object distance per configured object; a
    /// raised effector sits `lift_cm` above the table. Absent objects
    /// report [`ABSENT_DISTANCE_CM`], a held cylinder 0.
    pub distances: Vec<f64>,
    pub buttons_lit: Vec<bool>,
    pub gripper_occupied: bool,
    pub cylinder_visible: bool,
    /// Per placement box: whether the cylinder rests in it.
    pub in_box: Vec<bool>,
    layout: Arc<PerceptLayout>,
}

impl PerceptVector {
    pub fn layout(&self) -> &PerceptLayout {
        &self.layout
    }

    pub fn flag_count(&self) -> usize {
        self.buttons_lit.len() + 2 + self.in_box.len()
    }

    pub fn flag_at(&self, index: usize) -> bool {
        let nb = self.buttons_lit.len();
        if index < nb {
            self.buttons_lit[index]
        } else if index == nb {
            self.gripper_occupied
        } else if index == nb + 1 {
            self.cylinder_visible
        } else {
            self.in_box[index - nb - 2]
        }
    }

    /// Boolean fields paired with their predicate, in layout order.
    pub fn flags(&self) -> impl Iterator<Item = (&Predicate, bool)> + '_ {
        self.layout
            .predicates
            .iter()
            .enumerate()
            .map(|(i, p)| (p, self.flag_at(i)))
    }

    pub fn flag(&self, predicate: &Predicate) -> Option<bool> {
        self.layout
            .predicates
            .iter()
            .position(|p| p == predicate)
            .map(|i| self.flag_at(i))
    }

    /// Feature vector for the experts: distances scaled by the table
    /// diagonal (capped at 1), then boolean fields as 0/1.
    pub fn features(&self) -> Vec<f64> {
        let diag = self.layout.diagonal_cm;
        let mut out = Vec::with_capacity(self.distances.len() + self.flag_count());
        out.extend(self.distances.iter().map(|d| (d / diag).min(1.0)));
        out.extend((0..self.flag_count()).map(|i| if self.flag_at(i) { 1.0 } else { 0.0 }));
        out
    }
}

/// Start configurations the environment can be put into directly. Only
/// tests and tooling use this; agents reach start states with their skills.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CanonicalStart {
    Default,
    /// The scene right after the predicate became true.
    After(Predicate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub percept: PerceptVector,
    pub events: EventList,
}

struct PhaseRuntime {
    id: PhaseId,
    active: Vec<bool>,
    /// Prerequisite predicate indices per predicate index.
    prereqs: Vec<Vec<usize>>,
    exclusions: Vec<Vec<usize>>,
    cylinder_start: CylinderStart,
}

/// The simulator for one scenario. Stateless apart from its configuration;
/// all dynamic state lives in [`EnvState`].
pub struct Tabletop {
    config: ScenarioConfig,
    layout: Arc<PerceptLayout>,
    buttons: Vec<usize>,
    placement_boxes: Vec<usize>,
    cylinder: Option<usize>,
    phases: Vec<PhaseRuntime>,
}

impl Tabletop {
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let predicates = config.predicates();
        let buttons: Vec<usize> = config
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.kind == ObjectKind::Button)
            .map(|(i, _)| i)
            .collect();
        let placement_boxes: Vec<usize> = config
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.kind == ObjectKind::Box && o.placement)
            .map(|(i, _)| i)
            .collect();
        let cylinder = config.objects.iter().position(|o| o.kind == ObjectKind::Cylinder);
        let pred_index = |p: &Predicate| predicates.iter().position(|q| q == p).expect("validated");
        let phases = config
            .phases
            .iter()
            .map(|phase| {
                let mut prereqs = vec![Vec::new(); predicates.len()];
                let mut exclusions = vec![Vec::new(); predicates.len()];
                for (goal, reqs) in &phase.dependencies {
                    prereqs[pred_index(goal)] = reqs.iter().map(pred_index).collect();
                }
                for [a, b] in &phase.mutual_exclusions {
                    exclusions[pred_index(a)].push(pred_index(b));
                    exclusions[pred_index(b)].push(pred_index(a));
                }
                PhaseRuntime {
                    id: phase.id,
                    active: config
                        .objects
                        .iter()
                        .map(|o| phase.active_objects.contains(&o.id))
                        .collect(),
                    prereqs,
                    exclusions,
                    cylinder_start: phase.cylinder_start.clone(),
                }
            })
            .collect();
        let layout = Arc::new(PerceptLayout {
            objects: config.objects.iter().map(|o| o.id.clone()).collect(),
            predicates,
            diagonal_cm: config.table.diagonal(),
        });
        Ok(Tabletop { config, layout, buttons, placement_boxes, cylinder, phases })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn layout(&self) -> &Arc<PerceptLayout> {
        &self.layout
    }

    fn phase_rt(&self, phase: PhaseId) -> Result<&PhaseRuntime, ConfigError> {
        self.phases
            .iter()
            .find(|p| p.id == phase)
            .ok_or(ConfigError::UnknownPhase(phase))
    }

    fn held_index(&self) -> usize {
        self.buttons.len()
    }

    fn in_box_index(&self, k: usize) -> usize {
        self.buttons.len() + 2 + k
    }

    /// Initial state of a phase: effector at home and raised, gripper open,
    /// every button unlit, cylinder at the phase's start location.
    pub fn init_env(&self, phase: PhaseId, seed: u64) -> Result<EnvState, ConfigError> {
        let rt = self.phase_rt(phase)?;
        Ok(EnvState {
            effector: self.config.home,
            height: Height::High,
            gripper: Gripper::Open,
            holding: None,
            button_lit: vec![false; self.buttons.len()],
            cylinder: self.cylinder_start(rt),
            phase,
            step_count: 0,
            seed,
        })
    }

    fn cylinder_start(&self, rt: &PhaseRuntime) -> CylinderLocation {
        match self.cylinder {
            Some(c) if rt.active[c] => match &rt.cylinder_start {
                CylinderStart::Table => CylinderLocation::OnTable(self.config.objects[c].position),
                CylinderStart::Box(id) => CylinderLocation::InBox(id.clone()),
            },
            _ => CylinderLocation::Absent,
        }
    }

    /// Moves the arm back to its home pose; grasped objects stay grasped.
    pub fn return_home(&self, state: &mut EnvState) {
        state.effector = self.config.home;
        state.height = Height::High;
    }

    fn cylinder_position(&self, state: &EnvState) -> Option<Point> {
        match &state.cylinder {
            CylinderLocation::OnTable(p) => Some(*p),
            CylinderLocation::InBox(id) => self.config.object(id).map(|o| o.position),
            CylinderLocation::Held => Some(state.effector),
            CylinderLocation::Absent => None,
        }
    }

    fn flags(&self, state: &EnvState) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.layout.predicates.len());
        out.extend(state.button_lit.iter().copied());
        out.push(state.holding.is_some());
        out.push(matches!(state.cylinder, CylinderLocation::OnTable(_) | CylinderLocation::InBox(_)));
        for &b in &self.placement_boxes {
            let id = &self.config.objects[b].id;
            out.push(matches!(&state.cylinder, CylinderLocation::InBox(x) if x == id));
        }
        out
    }

    pub fn percept(&self, state: &EnvState) -> PerceptVector {
        let rt = self.phase_rt(state.phase).expect("state phase exists");
        let cyl = self.cylinder_position(state);
        let lift = self.config.lift_cm;
        let distances = self
            .config
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                if !rt.active[i] {
                    return ABSENT_DISTANCE_CM;
                }
                let pos = if Some(i) == self.cylinder {
                    match cyl {
                        Some(p) => p,
                        None => return ABSENT_DISTANCE_CM,
                    }
                } else {
                    o.position
                };
                if Some(i) == self.cylinder && state.cylinder == CylinderLocation::Held {
                    return 0.0;
                }
                let planar = state.effector.distance(pos);
                match state.height {
                    Height::Low => planar,
                    Height::High => planar.hypot(lift),
                }
            })
            .collect();
        let flags = self.flags(state);
        let nb = self.buttons.len();
        PerceptVector {
            distances,
            buttons_lit: flags[..nb].to_vec(),
            gripper_occupied: flags[nb],
            cylinder_visible: flags[nb + 1],
            in_box: flags[nb + 2..].to_vec(),
            layout: Arc::clone(&self.layout),
        }
    }

    fn prereqs_hold(rt: &PhaseRuntime, flags: &[bool], predicate: usize) -> bool {
        rt.prereqs[predicate].iter().all(|&p| flags[p])
            && rt.exclusions[predicate].iter().all(|&p| !flags[p])
    }

    fn within(&self, state: &EnvState, object: usize, target: Point) -> bool {
        state.effector.distance(target) <= self.config.objects[object].radius_cm
    }

    /// Advances the simulation by one time step. Commands that cannot take
    /// effect (closing on nothing, releasing away from a box, pressing an
    /// absent button) leave the scene unchanged.
    pub fn step(&self, state: &mut EnvState, action: Action) -> StepOutcome {
        let rt = self.phase_rt(state.phase).expect("state phase exists");
        let before = self.flags(state);

        match action.vertical {
            Vertical::Raise => state.height = Height::High,
            Vertical::Lower => state.height = Height::Low,
            Vertical::Hold => {}
        }
        if let Some(h) = action.heading {
            let (dx, dy) = h.unit();
            let step = self.config.step_cm;
            let moved = Point::new(state.effector.x + dx * step, state.effector.y + dy * step);
            state.effector = self.config.table.clamp(moved);
        }

        match action.gripper {
            GripperCmd::Close if state.holding.is_none() => {
                state.gripper = Gripper::Closed;
                if let Some(c) = self.cylinder {
                    let grabbable = matches!(
                        state.cylinder,
                        CylinderLocation::OnTable(_) | CylinderLocation::InBox(_)
                    );
                    let in_reach = self
                        .cylinder_position(state)
                        .is_some_and(|p| self.within(state, c, p));
                    if rt.active[c]
                        && grabbable
                        && in_reach
                        && Self::prereqs_hold(rt, &before, self.held_index())
                    {
                        state.holding = Some(self.config.objects[c].id.clone());
                        state.cylinder = CylinderLocation::Held;
                    }
                }
            }
            GripperCmd::Open if state.holding.is_some() => {
                let target = self.placement_boxes.iter().enumerate().find(|&(k, &b)| {
                    rt.active[b]
                        && self.within(state, b, self.config.objects[b].position)
                        && Self::prereqs_hold(rt, &before, self.in_box_index(k))
                });
                if let Some((_, &b)) = target {
                    state.cylinder = CylinderLocation::InBox(self.config.objects[b].id.clone());
                    state.holding = None;
                    state.gripper = Gripper::Open;
                }
            }
            GripperCmd::Open => state.gripper = Gripper::Open,
            GripperCmd::Close | GripperCmd::Hold => {}
        }

        if state.height == Height::Low {
            for (k, &b) in self.buttons.iter().enumerate() {
                if rt.active[b]
                    && !state.button_lit[k]
                    && self.within(state, b, self.config.objects[b].position)
                    && Self::prereqs_hold(rt, &before, k)
                {
                    state.button_lit[k] = true;
                }
            }
        }

        state.step_count += 1;
        let after = self.flags(state);
        let transitions: Vec<Transition> = before
            .iter()
            .zip(&after)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, (_, &now))| Transition {
                predicate: self.layout.predicates[i].clone(),
                rising: now,
            })
            .collect();
        let events = if transitions.is_empty() {
            Vec::new()
        } else {
            vec![Event { signature: Signature::new(transitions).expect("distinct predicates") }]
        };
        StepOutcome { percept: self.percept(state), events }
    }

    /// Switches the active phase. Removed buttons go dark and a cylinder
    /// whose container or own object disappears becomes absent; nothing else
    /// moves.
    pub fn apply_phase_change(&self, state: &EnvState, phase: PhaseId) -> Result<EnvState, ConfigError> {
        let rt = self.phase_rt(phase)?;
        if phase == state.phase {
            return Ok(state.clone());
        }
        let mut next = state.clone();
        next.phase = phase;
        for (k, &b) in self.buttons.iter().enumerate() {
            if !rt.active[b] {
                next.button_lit[k] = false;
            }
        }
        let cylinder_active = self.cylinder.is_some_and(|c| rt.active[c]);
        let container_gone = match &next.cylinder {
            CylinderLocation::InBox(id) => self
                .config
                .objects
                .iter()
                .position(|o| &o.id == id)
                .is_some_and(|i| !rt.active[i]),
            _ => false,
        };
        if !cylinder_active || container_gone {
            next.cylinder = CylinderLocation::Absent;
            next.holding = None;
        } else if next.cylinder == CylinderLocation::Absent {
            next.cylinder = self.cylinder_start(rt);
        }
        Ok(next)
    }

    /// Ground-truth value of a predicate. Metrics and tests only.
    pub fn check_predicate(&self, state: &EnvState, predicate: &Predicate) -> Result<bool> {
        let i = self
            .layout
            .predicates
            .iter()
            .position(|p| p == predicate)
            .ok_or_else(|| ConfigError::UnknownPredicate(predicate.to_string()))?;
        Ok(self.flags(state)[i])
    }

    /// Puts the scene directly into a canonical start configuration by
    /// satisfying the predicate's prerequisites and then the predicate.
    pub fn teleport_to_canonical(&self, state: &EnvState, start: &CanonicalStart) -> Result<EnvState> {
        let mut next = self.init_env(state.phase, state.seed)?;
        if let CanonicalStart::After(p) = start {
            self.force(&mut next, p, 0)?;
        }
        Ok(next)
    }

    fn force(&self, state: &mut EnvState, predicate: &Predicate, depth: usize) -> Result<()> {
        let unrealizable = || Error::Unrealizable(format!("after:{predicate}"));
        if depth > self.layout.predicates.len() {
            return Err(unrealizable());
        }
        let rt = self.phase_rt(state.phase)?;
        let index = self
            .layout
            .predicates
            .iter()
            .position(|p| p == predicate)
            .ok_or_else(|| ConfigError::UnknownPredicate(predicate.to_string()))?;
        for &req in &rt.prereqs[index] {
            let req = self.layout.predicates[req].clone();
            self.force(state, &req, depth + 1)?;
        }
        match predicate {
            Predicate::Lit(_) => {
                let b = self.buttons[index];
                if !rt.active[b] {
                    return Err(unrealizable());
                }
                state.button_lit[index] = true;
            }
            Predicate::Held => {
                let c = self.cylinder.filter(|&c| rt.active[c]).ok_or_else(unrealizable)?;
                state.holding = Some(self.config.objects[c].id.clone());
                state.cylinder = CylinderLocation::Held;
                state.gripper = Gripper::Closed;
            }
            Predicate::Visible => {
                if state.cylinder == CylinderLocation::Absent {
                    return Err(unrealizable());
                }
            }
            Predicate::InBox(id) => {
                let b = self.config.objects.iter().position(|o| &o.id == id).expect("validated");
                if !rt.active[b] || self.cylinder.is_none_or(|c| !rt.active[c]) {
                    return Err(unrealizable());
                }
                state.cylinder = CylinderLocation::InBox(id.clone());
                state.holding = None;
                state.gripper = Gripper::Open;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table() -> Tabletop {
        Tabletop::new(ScenarioConfig::default_tabletop()).unwrap()
    }

    fn lit(id: &str) -> Predicate {
        Predicate::Lit(id.into())
    }

    fn act(heading: Option<Heading>, vertical: Vertical, gripper: GripperCmd) -> Action {
        Action { heading, vertical, gripper }
    }

    fn random_action(rng: &mut impl Rng) -> Action {
        let heading = match rng.gen_range(0..9) {
            8 => None,
            i => Some(Heading::ALL[i]),
        };
        let vertical = [Vertical::Raise, Vertical::Lower, Vertical::Hold][rng.gen_range(0..3)];
        let gripper = [GripperCmd::Open, GripperCmd::Close, GripperCmd::Hold][rng.gen_range(0..3)];
        act(heading, vertical, gripper)
    }

    #[test]
    fn init_phase0_has_cylinder_in_holder() {
        let env = table();
        let s = env.init_env(0, 42).unwrap();
        assert_eq!(s.cylinder, CylinderLocation::InBox("holder".into()));
        assert_eq!(s.button_lit, vec![false; 3]);
        assert_eq!(s.step_count, 0);
        assert_eq!(s.effector, env.config().home);
    }

    #[test]
    fn init_phase1_has_no_orange_button() {
        let env = table();
        let s = env.init_env(1, 42).unwrap();
        let p = env.percept(&s);
        assert_eq!(p.distances[0], ABSENT_DISTANCE_CM);
        assert!(p.distances[6] < ABSENT_DISTANCE_CM, "round box present");
    }

    #[test]
    fn unknown_phase_is_config_error() {
        assert_eq!(table().init_env(9, 42), Err(ConfigError::UnknownPhase(9)));
        let env = table();
        let s = env.init_env(0, 1).unwrap();
        assert!(env.apply_phase_change(&s, 9).is_err());
    }

    #[test]
    fn press_next_to_button() {
        let env = table();
        let mut s = env.init_env(0, 42).unwrap();
        s.effector = Point::new(33.0, 65.0);
        let out = env.step(&mut s, act(None, Vertical::Lower, GripperCmd::Hold));
        assert_eq!(
            out.events,
            vec![Event { signature: Signature::new(vec![Transition::rising(lit("orange"))]).unwrap() }]
        );
        assert!(env.check_predicate(&s, &lit("orange")).unwrap());
    }

    #[test]
    fn press_requires_low_height() {
        let env = table();
        let mut s = env.init_env(0, 42).unwrap();
        s.effector = Point::new(33.0, 65.0);
        let out = env.step(&mut s, act(None, Vertical::Raise, GripperCmd::Hold));
        assert!(out.events.is_empty());
    }

    #[test]
    fn closing_far_from_everything_changes_nothing_but_position() {
        let env = table();
        let mut s = env.init_env(0, 42).unwrap();
        let before = s.clone();
        let out = env.step(&mut s, act(Some(Heading::S), Vertical::Hold, GripperCmd::Close));
        assert!(out.events.is_empty());
        assert_eq!(s.holding, None);
        assert_eq!(s.cylinder, before.cylinder);
        assert_eq!(s.button_lit, before.button_lit);
        assert_eq!(s.effector, Point::new(60.0, 30.0));
    }

    #[test]
    fn release_over_square_box() {
        let env = table();
        let s0 = env.init_env(0, 42).unwrap();
        let mut s = env.teleport_to_canonical(&s0, &CanonicalStart::After(Predicate::Held)).unwrap();
        s.effector = Point::new(97.0, 35.0);
        let out = env.step(&mut s, act(None, Vertical::Hold, GripperCmd::Open));
        let sig = &out.events[0].signature;
        assert!(sig.transitions().contains(&Transition::rising(Predicate::InBox("square_box".into()))));
        assert!(sig.transitions().contains(&Transition::falling(Predicate::Held)));
        assert!(!out.percept.gripper_occupied);
    }

    #[test]
    fn release_away_from_boxes_is_a_noop() {
        let env = table();
        let s0 = env.init_env(0, 42).unwrap();
        let mut s = env.teleport_to_canonical(&s0, &CanonicalStart::After(Predicate::Held)).unwrap();
        let out = env.step(&mut s, act(None, Vertical::Hold, GripperCmd::Open));
        assert!(out.events.is_empty());
        assert_eq!(s.cylinder, CylinderLocation::Held);
    }

    #[test]
    fn grasp_requires_orange_in_phase0() {
        let env = table();
        let mut s = env.init_env(0, 42).unwrap();
        s.effector = Point::new(22.0, 35.0);
        env.step(&mut s, act(None, Vertical::Lower, GripperCmd::Close));
        assert_eq!(s.holding, None);
        s.button_lit[0] = true;
        s.gripper = Gripper::Open;
        let out = env.step(&mut s, act(None, Vertical::Lower, GripperCmd::Close));
        assert_eq!(s.holding.as_deref(), Some("cylinder"));
        assert_eq!(out.events.len(), 1);
    }

    #[test]
    fn phase_change_swaps_objects() {
        let env = table();
        let mut s = env.init_env(0, 42).unwrap();
        s.button_lit[0] = true;
        let next = env.apply_phase_change(&s, 1).unwrap();
        assert!(!env.check_predicate(&next, &lit("orange")).unwrap());
        let p = env.percept(&next);
        assert_eq!(p.distances[0], ABSENT_DISTANCE_CM);
        assert!(p.distances[6] < ABSENT_DISTANCE_CM);
        assert_eq!(env.apply_phase_change(&next, 1).unwrap(), next);
    }

    #[test]
    fn phase_change_keeps_cylinder_in_square_box() {
        let env = table();
        let s0 = env.init_env(0, 42).unwrap();
        let s = env
            .teleport_to_canonical(&s0, &CanonicalStart::After(Predicate::InBox("square_box".into())))
            .unwrap();
        let next = env.apply_phase_change(&s, 1).unwrap();
        assert!(env.check_predicate(&next, &Predicate::InBox("square_box".into())).unwrap());
        assert!(!env.check_predicate(&next, &Predicate::InBox("round_box".into())).unwrap());
    }

    #[test]
    fn check_predicate_rejects_unknown() {
        let env = table();
        let s = env.init_env(0, 42).unwrap();
        assert!(env.check_predicate(&s, &lit("purple")).is_err());
    }

    #[test]
    fn round_box_excludes_square_box() {
        let env = table();
        let s0 = env.init_env(1, 42).unwrap();
        let s = env
            .teleport_to_canonical(&s0, &CanonicalStart::After(Predicate::InBox("round_box".into())))
            .unwrap();
        assert!(!env.check_predicate(&s, &Predicate::InBox("square_box".into())).unwrap());
    }

    #[test]
    fn teleport_cases() {
        let env = table();
        let s0 = env.init_env(0, 42).unwrap();
        let s = env.teleport_to_canonical(&s0, &CanonicalStart::After(Predicate::Held)).unwrap();
        assert_eq!(s.cylinder, CylinderLocation::Held);
        assert!(env.percept(&s).gripper_occupied);
        assert!(env.check_predicate(&s, &lit("orange")).unwrap(), "prerequisite satisfied too");

        let s1 = env.init_env(1, 42).unwrap();
        assert!(matches!(
            env.teleport_to_canonical(&s1, &CanonicalStart::After(lit("orange"))),
            Err(Error::Unrealizable(_))
        ));
        assert_eq!(
            env.teleport_to_canonical(&s1, &CanonicalStart::Default).unwrap(),
            env.init_env(1, 42).unwrap()
        );
    }

    #[test]
    fn single_step_displacement_is_step_size() {
        let env = table();
        for h in Heading::ALL {
            let mut s = env.init_env(0, 0).unwrap();
            let start = s.effector;
            env.step(&mut s, act(Some(h), Vertical::Hold, GripperCmd::Hold));
            assert!((start.distance(s.effector) - 5.0).abs() < 1e-12, "{h:?}");
        }
    }

    #[test]
    fn random_walk_invariants() {
        let env = table();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for phase in [0, 1] {
            let mut s = env.init_env(phase, 7).unwrap();
            for i in 0..20_000 {
                if i % 500 == 0 {
                    s = env.init_env(phase, 7).unwrap();
                }
                let start = s.effector;
                env.step(&mut s, random_action(&mut rng));
                let moved = start.distance(s.effector);
                assert!(moved <= 5.0 + 1e-9);
                assert!(env.config().table.contains(s.effector));
                assert_eq!(s.holding.is_some(), s.cylinder == CylinderLocation::Held);
                if s.holding.is_some() {
                    assert_eq!(s.gripper, Gripper::Closed);
                }
                let sq = env.check_predicate(&s, &Predicate::InBox("square_box".into())).unwrap();
                let rd = env.check_predicate(&s, &Predicate::InBox("round_box".into())).unwrap();
                assert!(!(sq && rd));
            }
        }
    }
}
