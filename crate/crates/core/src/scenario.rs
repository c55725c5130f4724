//! Declarative description of the tabletop scenario.
//!
//! A [`ScenarioConfig`] lists the objects on the table, one [`PhaseSpec`] per
//! environment configuration (which objects are present, which goal
//! predicates gate which), and the epoch schedule that switches between
//! phases. The built-in [`ScenarioConfig::default_tabletop`] is also shipped
//! as `configs/scenario.toml`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub type ObjectId = String;
pub type PhaseId = u32;

/// A boolean fact about the scene that the robot can perceive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    /// A button is lit.
    Lit(ObjectId),
    /// The gripper force sensor reports an object.
    Held,
    /// The cylinder is visible (not hidden by the gripper, not removed).
    Visible,
    /// The cylinder rests inside the given placement box.
    InBox(ObjectId),
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Lit(id) => write!(f, "lit:{id}"),
            Predicate::Held => write!(f, "held"),
            Predicate::Visible => write!(f, "visible"),
            Predicate::InBox(id) => write!(f, "in:{id}"),
        }
    }
}

impl FromStr for Predicate {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "held" => return Ok(Predicate::Held),
            "visible" => return Ok(Predicate::Visible),
            _ => {}
        }
        if let Some(id) = s.strip_prefix("lit:") {
            if !id.is_empty() {
                return Ok(Predicate::Lit(id.to_string()));
            }
        }
        if let Some(id) = s.strip_prefix("in:") {
            if !id.is_empty() {
                return Ok(Predicate::InBox(id.to_string()));
            }
        }
        Err(ConfigError::UnknownPredicate(s.to_string()))
    }
}

impl Serialize for Predicate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Button,
    Cylinder,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }

    pub fn diagonal(&self) -> f64 {
        self.min.distance(self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub position: Point,
    #[serde(default = "default_radius")]
    pub radius_cm: f64,
    /// Boxes only: whether a held cylinder can be released into it. A box
    /// that is merely the cylinder's initial holder is not a placement
    /// target and has no in-box flag in the percept.
    #[serde(default = "default_true")]
    pub placement: bool,
}

fn default_radius() -> f64 {
    10.0
}

fn default_true() -> bool {
    true
}

/// Where the cylinder sits when a phase starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderStart {
    /// On the table at the cylinder object's configured position.
    Table,
    /// Inside the box with this id.
    Box(ObjectId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub id: PhaseId,
    pub active_objects: BTreeSet<ObjectId>,
    pub cylinder_start: CylinderStart,
    /// Goal predicate -> predicates that must hold before it can become true.
    #[serde(default)]
    pub dependencies: BTreeMap<Predicate, BTreeSet<Predicate>>,
    #[serde(default)]
    pub mutual_exclusions: Vec<[Predicate; 2]>,
}

impl PhaseSpec {
    pub fn is_active(&self, object: &str) -> bool {
        self.active_objects.contains(object)
    }

    pub fn prerequisites(&self, predicate: &Predicate) -> impl Iterator<Item = &Predicate> {
        self.dependencies.get(predicate).into_iter().flatten()
    }

    pub fn excluded_by<'a>(&'a self, predicate: &'a Predicate) -> impl Iterator<Item = &'a Predicate> + 'a {
        self.mutual_exclusions.iter().filter_map(move |[a, b]| {
            if a == predicate {
                Some(b)
            } else if b == predicate {
                Some(a)
            } else {
                None
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub epoch: u32,
    pub phase: PhaseId,
}

/// One of the scenario's discoverable goals, used only for metrics and
/// ground-truth checks. The agent never reads this list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverableGoal {
    pub name: String,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub table: Rect,
    pub home: Point,
    #[serde(default = "default_step")]
    pub step_cm: f64,
    /// Height of the raised effector above the table surface.
    #[serde(default = "default_lift")]
    pub lift_cm: f64,
    pub objects: Vec<ObjectSpec>,
    pub phases: Vec<PhaseSpec>,
    pub phase_schedule: Vec<ScheduleEntry>,
    #[serde(default)]
    pub goals: Vec<DiscoverableGoal>,
}

fn default_step() -> f64 {
    5.0
}

fn default_lift() -> f64 {
    10.0
}

impl ScenarioConfig {
    /// Parses and validates a TOML scenario description.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn object(&self, id: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn phase(&self, id: PhaseId) -> Result<&PhaseSpec, ConfigError> {
        self.phases
            .iter()
            .find(|p| p.id == id)
            .ok_or(ConfigError::UnknownPhase(id))
    }

    pub fn buttons(&self) -> impl Iterator<Item = &ObjectSpec> {
        self.objects.iter().filter(|o| o.kind == ObjectKind::Button)
    }

    pub fn placement_boxes(&self) -> impl Iterator<Item = &ObjectSpec> {
        self.objects
            .iter()
            .filter(|o| o.kind == ObjectKind::Box && o.placement)
    }

    pub fn cylinder(&self) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.kind == ObjectKind::Cylinder)
    }

    /// Phase in force at `epoch` according to the schedule.
    pub fn phase_at(&self, epoch: u32) -> PhaseId {
        self.phase_schedule
            .iter()
            .take_while(|e| e.epoch <= epoch)
            .last()
            .map(|e| e.phase)
            .unwrap_or(self.phase_schedule[0].phase)
    }

    /// Every predicate the percept layout exposes, in layout order.
    pub fn predicates(&self) -> Vec<Predicate> {
        let mut out: Vec<Predicate> = self.buttons().map(|b| Predicate::Lit(b.id.clone())).collect();
        out.push(Predicate::Held);
        out.push(Predicate::Visible);
        out.extend(self.placement_boxes().map(|b| Predicate::InBox(b.id.clone())));
        out
    }

    pub fn is_known_predicate(&self, p: &Predicate) -> bool {
        match p {
            Predicate::Lit(id) => self
                .object(id)
                .is_some_and(|o| o.kind == ObjectKind::Button),
            Predicate::Held | Predicate::Visible => self.cylinder().is_some(),
            Predicate::InBox(id) => self
                .object(id)
                .is_some_and(|o| o.kind == ObjectKind::Box && o.placement),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.table.min.x < self.table.max.x && self.table.min.y < self.table.max.y) {
            return Err(ConfigError::Invalid("table bounds are empty".into()));
        }
        if !self.table.contains(self.home) {
            return Err(ConfigError::Invalid("home position outside the table".into()));
        }
        if !(self.step_cm > 0.0 && self.step_cm.is_finite()) {
            return Err(ConfigError::Invalid("step_cm must be positive".into()));
        }
        if !(self.lift_cm >= 0.0 && self.lift_cm.is_finite()) {
            return Err(ConfigError::Invalid("lift_cm must be non-negative".into()));
        }
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(o.id.as_str()) {
                return Err(ConfigError::DuplicateObject(o.id.clone()));
            }
            if !self.table.contains(o.position) {
                return Err(ConfigError::Invalid(format!("object {} outside the table", o.id)));
            }
            if !(o.radius_cm > 0.0) {
                return Err(ConfigError::Invalid(format!("object {} needs a positive radius", o.id)));
            }
        }
        if self.objects.iter().filter(|o| o.kind == ObjectKind::Cylinder).count() > 1 {
            return Err(ConfigError::Invalid("at most one cylinder is supported".into()));
        }
        if self.phases.is_empty() {
            return Err(ConfigError::Invalid("no phases defined".into()));
        }
        let mut phase_ids = BTreeSet::new();
        for phase in &self.phases {
            if !phase_ids.insert(phase.id) {
                return Err(ConfigError::Invalid(format!("duplicate phase id {}", phase.id)));
            }
            self.validate_phase(phase)?;
        }
        match self.phase_schedule.first() {
            Some(first) if first.epoch == 0 => {}
            _ => return Err(ConfigError::Invalid("phase schedule must start at epoch 0".into())),
        }
        for pair in self.phase_schedule.windows(2) {
            if pair[1].epoch <= pair[0].epoch {
                return Err(ConfigError::Invalid(
                    "phase schedule epochs must be strictly increasing".into(),
                ));
            }
        }
        for entry in &self.phase_schedule {
            self.phase(entry.phase)?;
        }
        for goal in &self.goals {
            if !self.is_known_predicate(&goal.predicate) {
                return Err(ConfigError::UnknownPredicate(goal.predicate.to_string()));
            }
        }
        Ok(())
    }

    fn validate_phase(&self, phase: &PhaseSpec) -> Result<(), ConfigError> {
        for id in &phase.active_objects {
            if self.object(id).is_none() {
                return Err(ConfigError::UnknownObject(id.clone()));
            }
        }
        if let CylinderStart::Box(id) = &phase.cylinder_start {
            match self.object(id) {
                Some(o) if o.kind == ObjectKind::Box => {}
                _ => return Err(ConfigError::UnknownObject(id.clone())),
            }
        }
        for (goal, prereqs) in &phase.dependencies {
            for p in std::iter::once(goal).chain(prereqs) {
                if !self.is_known_predicate(p) {
                    return Err(ConfigError::UnknownPredicate(p.to_string()));
                }
            }
        }
        for [a, b] in &phase.mutual_exclusions {
            for p in [a, b] {
                if !matches!(p, Predicate::InBox(_)) || !self.is_known_predicate(p) {
                    return Err(ConfigError::Invalid(format!(
                        "mutual exclusion in phase {} must pair placement predicates, got {p}",
                        phase.id
                    )));
                }
            }
        }
        if has_cycle(&phase.dependencies) {
            return Err(ConfigError::Invalid(format!(
                "dependency graph of phase {} has a cycle",
                phase.id
            )));
        }
        Ok(())
    }

    /// The tabletop used throughout the experiments: three buttons, a red
    /// cylinder resting in a circular holder, a square box, and a round box
    /// that appears in phase 1 when the orange button is removed.
    pub fn default_tabletop() -> Self {
        let obj = |id: &str, kind, x, y, placement| ObjectSpec {
            id: id.to_string(),
            kind,
            position: Point::new(x, y),
            radius_cm: 10.0,
            placement,
        };
        let lit = |id: &str| Predicate::Lit(id.to_string());
        let inbox = |id: &str| Predicate::InBox(id.to_string());
        let set = |items: &[Predicate]| items.iter().cloned().collect::<BTreeSet<_>>();
        let names = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();

        let phase0 = PhaseSpec {
            id: 0,
            active_objects: names(&["orange", "green", "blue", "cylinder", "holder", "square_box"]),
            cylinder_start: CylinderStart::Box("holder".into()),
            dependencies: BTreeMap::from([
                (Predicate::Held, set(&[lit("orange")])),
                (inbox("square_box"), set(&[Predicate::Held])),
            ]),
            mutual_exclusions: vec![],
        };
        let phase1 = PhaseSpec {
            id: 1,
            active_objects: names(&["green", "blue", "cylinder", "holder", "square_box", "round_box"]),
            cylinder_start: CylinderStart::Box("holder".into()),
            dependencies: BTreeMap::from([
                (Predicate::Held, set(&[lit("green")])),
                (inbox("square_box"), set(&[Predicate::Held])),
                (inbox("round_box"), set(&[Predicate::Held])),
            ]),
            mutual_exclusions: vec![[inbox("square_box"), inbox("round_box")]],
        };
        ScenarioConfig {
            table: Rect {
                min: Point::new(0.0, 0.0),
                max: Point::new(120.0, 80.0),
            },
            home: Point::new(60.0, 35.0),
            step_cm: 5.0,
            lift_cm: 10.0,
            objects: vec![
                obj("orange", ObjectKind::Button, 30.0, 65.0, true),
                obj("green", ObjectKind::Button, 60.0, 75.0, true),
                obj("blue", ObjectKind::Button, 90.0, 65.0, true),
                obj("cylinder", ObjectKind::Cylinder, 20.0, 35.0, true),
                obj("holder", ObjectKind::Box, 20.0, 35.0, false),
                obj("square_box", ObjectKind::Box, 100.0, 35.0, true),
                obj("round_box", ObjectKind::Box, 60.0, 5.0, true),
            ],
            phases: vec![phase0, phase1],
            phase_schedule: vec![
                ScheduleEntry { epoch: 0, phase: 0 },
                ScheduleEntry { epoch: 750, phase: 1 },
            ],
            goals: vec![
                DiscoverableGoal { name: "Orange button pressed".into(), predicate: lit("orange") },
                DiscoverableGoal { name: "Green button pressed".into(), predicate: lit("green") },
                DiscoverableGoal { name: "Blue button pressed".into(), predicate: lit("blue") },
                DiscoverableGoal { name: "Red cylinder grabbed".into(), predicate: Predicate::Held },
                DiscoverableGoal {
                    name: "Red cylinder in square box".into(),
                    predicate: inbox("square_box"),
                },
                DiscoverableGoal {
                    name: "Red cylinder in round box".into(),
                    predicate: inbox("round_box"),
                },
            ],
        }
    }
}

fn has_cycle(deps: &BTreeMap<Predicate, BTreeSet<Predicate>>) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        node: &'a Predicate,
        deps: &'a BTreeMap<Predicate, BTreeSet<Predicate>>,
        marks: &mut BTreeMap<&'a Predicate, Mark>,
    ) -> bool {
        match marks.get(node) {
            Some(Mark::Active) => return true,
            Some(Mark::Done) => return false,
            None => {}
        }
        marks.insert(node, Mark::Active);
        for next in deps.get(node).into_iter().flatten() {
            if visit(next, deps, marks) {
                return true;
            }
        }
        marks.insert(node, Mark::Done);
        false
    }
    let mut marks = BTreeMap::new();
    deps.keys().any(|k| visit(k, deps, &mut marks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default_tabletop().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let config = ScenarioConfig::default_tabletop();
        let text = config.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), config);
    }

    #[test]
    fn shipped_scenario_file_matches_builtin() {
        let text = include_str!("../../../configs/scenario.toml");
        assert_eq!(
            ScenarioConfig::from_toml_str(text).unwrap(),
            ScenarioConfig::default_tabletop()
        );
    }

    #[test]
    fn predicate_parsing() {
        assert_eq!("lit:orange".parse::<Predicate>().unwrap(), Predicate::Lit("orange".into()));
        assert_eq!("held".parse::<Predicate>().unwrap(), Predicate::Held);
        assert_eq!("in:round_box".parse::<Predicate>().unwrap().to_string(), "in:round_box");
        assert!("lit:".parse::<Predicate>().is_err());
        assert!("grabbed".parse::<Predicate>().is_err());
    }

    #[test]
    fn rejects_cyclic_dependencies() {
        let mut config = ScenarioConfig::default_tabletop();
        config.phases[0]
            .dependencies
            .insert(Predicate::Lit("orange".into()), BTreeSet::from([Predicate::Held]));
        assert!(matches!(config.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn rejects_duplicate_ids_and_bad_schedule() {
        let mut config = ScenarioConfig::default_tabletop();
        config.objects.push(config.objects[0].clone());
        assert!(matches!(config.validate(), Err(ConfigError::DuplicateObject(_))));

        let mut config = ScenarioConfig::default_tabletop();
        config.phase_schedule[1].epoch = 0;
        assert!(config.validate().is_err());

        let mut config = ScenarioConfig::default_tabletop();
        config.phase_schedule[0].epoch = 3;
        assert!(config.validate().is_err());
    }

    #[test]
    fn rejects_non_placement_exclusion() {
        let mut config = ScenarioConfig::default_tabletop();
        config.phases[1].mutual_exclusions = vec![[Predicate::Held, Predicate::Lit("green".into())]];
        assert!(config.validate().is_err());
    }

    #[test]
    fn dependency_on_unknown_predicate_is_rejected() {
        let mut config = ScenarioConfig::default_tabletop();
        config.phases[0]
            .dependencies
            .insert(Predicate::Lit("purple".into()), BTreeSet::new());
        assert!(matches!(config.validate(), Err(ConfigError::UnknownPredicate(_))));
    }

    #[test]
    fn parse_error_carries_line_information() {
        let err = ScenarioConfig::from_toml_str("table = [\n  broken").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn phase_lookup_follows_schedule() {
        let config = ScenarioConfig::default_tabletop();
        assert_eq!(config.phase_at(0), 0);
        assert_eq!(config.phase_at(749), 0);
        assert_eq!(config.phase_at(750), 1);
        assert_eq!(config.phase_at(1499), 1);
    }
}
