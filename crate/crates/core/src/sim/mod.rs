//! Abstract kinematic simulator for the pick-and-place plan.
//!
//! The world is a set of named entities with 3D poses, an agent with planar
//! kinematics, and six task-state keys. Failure scenarios are injected as
//! world mutations (contextual faults) or component flags (navigation
//! faults); failures then emerge from the per-action checks in [`exec`].

pub mod exec;
pub mod io;
pub mod world;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exec::{init_state, is_failure, run_episode, step, Plan};
pub use world::{inject_fault, WorldLayout};

/// Objects of interest the agent may be asked to fetch.
pub const OBJECTS: [&str; 5] = ["milk", "coke can", "ice cream", "bottle", "cup"];
/// Semantic places the agent can navigate to.
pub const PLACES: [&str; 2] = ["dining table", "left kitchen counter"];
/// Extra entities used as clutter, occluders or background.
pub const DISTRACTORS: [&str; 6] = ["apple", "bowl", "cereal box", "plate", "sponge", "spoon"];

pub const OCCLUDER: &str = "cereal box";
pub const CLUTTER: [&str; 3] = ["apple", "spoon", "sponge"];
pub const BACKGROUND: [&str; 2] = ["bowl", "plate"];

/// Sampling rate of every trace, in Hz.
pub const SAMPLE_HZ: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityId(String);

impl EntityId {
    pub fn new(name: &str) -> Result<Self> {
        if Self::catalog().any(|n| n == name) {
            Ok(EntityId(name.to_string()))
        } else {
            Err(Error::Config(format!("unknown entity `{name}`")))
        }
    }

    /// Every entity name a world may contain, in a fixed order.
    pub fn catalog() -> impl Iterator<Item = &'static str> {
        OBJECTS.iter().chain(PLACES.iter()).chain(DISTRACTORS.iter()).copied()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_object(&self) -> bool {
        OBJECTS.contains(&self.0.as_str())
    }

    pub fn is_place(&self) -> bool {
        PLACES.contains(&self.0.as_str())
    }

    pub(crate) fn known(name: &'static str) -> Self {
        EntityId(name.to_string())
    }
}

impl TryFrom<String> for EntityId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        EntityId::new(&s)
    }
}

impl From<EntityId> for String {
    fn from(e: EntityId) -> String {
        e.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A point in the world frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Pose3 {
    pub const ORIGIN: Pose3 = Pose3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Pose3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Pose3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(self, other: Pose3) -> f64 {
        norm(sub(self.to_array(), other.to_array()))
    }

    pub fn planar_distance(self, other: Pose3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(self, d: [f64; 3]) -> Pose3 {
        Pose3::new(self.x + d[0], self.y + d[1], self.z + d[2])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentKinematics {
    /// rad/s
    pub angular_velocity: [f64; 3],
    /// m/s
    pub linear_velocity: [f64; 3],
    pub position: Pose3,
}

impl AgentKinematics {
    pub fn at_rest(position: Pose3) -> Self {
        AgentKinematics {
            angular_velocity: [0.0; 3],
            linear_velocity: [0.0; 3],
            position,
        }
    }

    pub fn angular_speed(&self) -> f64 {
        norm(self.angular_velocity)
    }

    pub fn linear_speed(&self) -> f64 {
        norm(self.linear_velocity)
    }
}

/// The seven plan actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Move,
    Segment,
    Detect,
    FindGrasp,
    Grasp,
    Lift,
    Place,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::Move,
        Action::Segment,
        Action::Detect,
        Action::FindGrasp,
        Action::Grasp,
        Action::Lift,
        Action::Place,
    ];

    /// Task-state key that tracks this action. Lift and place share `k_pick`.
    pub fn key(self) -> TaskKey {
        match self {
            Action::Move => TaskKey::Move,
            Action::Segment => TaskKey::Seg,
            Action::Detect => TaskKey::Detect,
            Action::FindGrasp => TaskKey::FindGrasp,
            Action::Grasp => TaskKey::Grasp,
            Action::Lift | Action::Place => TaskKey::Pick,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Move => "move",
            Action::Segment => "segment",
            Action::Detect => "detect",
            Action::FindGrasp => "findgrasp",
            Action::Grasp => "grasp",
            Action::Lift => "lift",
            Action::Place => "place",
        };
        f.write_str(s)
    }
}

/// The six task-state keys, in feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKey {
    Grasp,
    FindGrasp,
    Move,
    Pick,
    Detect,
    Seg,
}

impl TaskKey {
    pub const ALL: [TaskKey; 6] = [
        TaskKey::Grasp,
        TaskKey::FindGrasp,
        TaskKey::Move,
        TaskKey::Pick,
        TaskKey::Detect,
        TaskKey::Seg,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKey::Grasp => "k_grasp",
            TaskKey::FindGrasp => "k_findgrasp",
            TaskKey::Move => "k_move",
            TaskKey::Pick => "k_pick",
            TaskKey::Detect => "k_detect",
            TaskKey::Seg => "k_seg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TaskStatus {
    #[default]
    Undefined,
    Active,
    Completed,
    Errored,
}

impl TaskStatus {
    /// Numeric task-state code: active 0, completed 1, errored -1.
    pub fn code(self) -> Option<i8> {
        match self {
            TaskStatus::Undefined => None,
            TaskStatus::Active => Some(0),
            TaskStatus::Completed => Some(1),
            TaskStatus::Errored => Some(-1),
        }
    }

    pub fn from_code(code: Option<i8>) -> Result<Self> {
        match code {
            None => Ok(TaskStatus::Undefined),
            Some(0) => Ok(TaskStatus::Active),
            Some(1) => Ok(TaskStatus::Completed),
            Some(-1) => Ok(TaskStatus::Errored),
            Some(c) => Err(Error::Schema(format!("invalid task-state code {c}"))),
        }
    }
}

/// Status of all six task-state keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TaskStates(pub [TaskStatus; 6]);

impl TaskStates {
    pub fn get(&self, key: TaskKey) -> TaskStatus {
        self.0[key.index()]
    }

    pub fn set(&mut self, key: TaskKey, status: TaskStatus) {
        self.0[key.index()] = status;
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskKey, TaskStatus)> + '_ {
        TaskKey::ALL.iter().map(move |&k| (k, self.get(k)))
    }

    pub fn all_completed(&self) -> bool {
        self.0.iter().all(|s| *s == TaskStatus::Completed)
    }

    pub fn errored(&self) -> Option<TaskKey> {
        self.iter().find(|(_, s)| *s == TaskStatus::Errored).map(|(k, _)| k)
    }

    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|s| **s == TaskStatus::Active).count()
    }
}

/// World-side fault markers carried with every snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorldFlags {
    pub occluded: bool,
    pub motor_fault: bool,
}

/// Full agent and world state at one sampled tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: u32,
    pub entity_locations: BTreeMap<EntityId, Pose3>,
    pub kinematics: AgentKinematics,
    pub task_states: TaskStates,
    /// The agent's own estimate of its position. Differs from
    /// `kinematics.position` only under a localization fault.
    pub believed_position: Pose3,
    pub flags: WorldFlags,
}

impl Snapshot {
    pub fn location(&self, entity: &EntityId) -> Option<Pose3> {
        self.entity_locations.get(entity).copied()
    }

    pub fn localization_error(&self) -> f64 {
        self.believed_position.distance(self.kinematics.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureType {
    MotionPlanning,
    Detection,
    Navigation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureScenario {
    #[serde(rename = "no_failure")]
    NoFailure,
    #[serde(rename = "too_far")]
    TooFarAway,
    #[serde(rename = "close_together")]
    CloseToOthers,
    #[serde(rename = "not_present")]
    NotPresent,
    #[serde(rename = "occluded")]
    Occluded,
    #[serde(rename = "mislocalized")]
    MisLocalization,
    #[serde(rename = "controller")]
    Controller,
}

impl FailureScenario {
    pub const FAILING: [FailureScenario; 6] = [
        FailureScenario::TooFarAway,
        FailureScenario::CloseToOthers,
        FailureScenario::NotPresent,
        FailureScenario::Occluded,
        FailureScenario::MisLocalization,
        FailureScenario::Controller,
    ];

    pub fn failure_type(self) -> Option<FailureType> {
        use FailureScenario::*;
        match self {
            NoFailure => None,
            TooFarAway | CloseToOthers => Some(FailureType::MotionPlanning),
            NotPresent | Occluded => Some(FailureType::Detection),
            MisLocalization | Controller => Some(FailureType::Navigation),
        }
    }

    /// The action on which the plan halts under this scenario.
    pub fn failed_action(self) -> Option<Action> {
        use FailureScenario::*;
        match self {
            NoFailure => None,
            TooFarAway | CloseToOthers => Some(Action::Grasp),
            NotPresent | Occluded => Some(Action::Detect),
            MisLocalization => Some(Action::Segment),
            Controller => Some(Action::Move),
        }
    }

    /// The other scenario of the same failure type.
    pub fn sibling(self) -> Option<FailureScenario> {
        use FailureScenario::*;
        match self {
            NoFailure => None,
            TooFarAway => Some(CloseToOthers),
            CloseToOthers => Some(TooFarAway),
            NotPresent => Some(Occluded),
            Occluded => Some(NotPresent),
            MisLocalization => Some(Controller),
            Controller => Some(MisLocalization),
        }
    }

    /// Stable snake-case name, shared with the evaluation class names.
    pub fn name(self) -> &'static str {
        use FailureScenario::*;
        match self {
            NoFailure => "no_failure",
            TooFarAway => "too_far",
            CloseToOthers => "close_together",
            NotPresent => "not_present",
            Occluded => "occluded",
            MisLocalization => "mislocalized",
            Controller => "controller",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        std::iter::once(FailureScenario::NoFailure)
            .chain(Self::FAILING)
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown failure scenario `{name}`")))
    }
}

impl fmt::Display for FailureScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-action durations in seconds (ticks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionDurations {
    #[serde(rename = "move")]
    pub move_: u32,
    pub segment: u32,
    pub detect: u32,
    pub findgrasp: u32,
    pub grasp: u32,
    pub lift: u32,
    pub place: u32,
}

impl Default for ActionDurations {
    fn default() -> Self {
        ActionDurations {
            move_: 10,
            segment: 3,
            detect: 3,
            findgrasp: 3,
            grasp: 4,
            lift: 2,
            place: 3,
        }
    }
}

impl ActionDurations {
    pub fn of(&self, action: Action) -> u32 {
        match action {
            Action::Move => self.move_,
            Action::Segment => self.segment,
            Action::Detect => self.detect,
            Action::FindGrasp => self.findgrasp,
            Action::Grasp => self.grasp,
            Action::Lift => self.lift,
            Action::Place => self.place,
        }
    }
}

/// Geometry and timing constants of the simulated world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Arm reach from the manipulation standpoint, m.
    pub r_max: f64,
    /// Clutter distance below which grasping fails, m.
    pub d_clutter: f64,
    /// Minimum magnitude of an injected localization offset, m.
    pub d_misloc: f64,
    /// Radius of the area around a place counted as "at the place", m.
    pub goal_radius: f64,
    /// Base translation speed, m/s.
    pub move_speed: f64,
    /// Base turn rate, rad/s.
    pub turn_rate: f64,
    /// Planar distance between a place and the standpoint in front of it, m.
    pub standoff: f64,
    /// Maximum distance from the navigation target still counted as arrived, m.
    pub arrive_tolerance: f64,
    /// Maximum planar distance from the standpoint at which segmentation sees the place, m.
    pub view_tolerance: f64,
    /// Velocity gain under a motor fault.
    pub motor_fault_gain: f64,
    pub durations: ActionDurations,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            r_max: 1.0,
            d_clutter: 0.05,
            d_misloc: 0.5,
            goal_radius: 1.0,
            move_speed: 0.5,
            turn_rate: 1.0,
            standoff: 0.5,
            arrive_tolerance: 0.05,
            view_tolerance: 0.25,
            motor_fault_gain: 1e-4,
            durations: ActionDurations::default(),
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_max", self.r_max),
            ("d_clutter", self.d_clutter),
            ("d_misloc", self.d_misloc),
            ("goal_radius", self.goal_radius),
            ("move_speed", self.move_speed),
            ("turn_rate", self.turn_rate),
            ("standoff", self.standoff),
            ("arrive_tolerance", self.arrive_tolerance),
            ("view_tolerance", self.view_tolerance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("world.{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.motor_fault_gain) {
            return Err(Error::Config("world.motor_fault_gain must lie in [0, 1)".into()));
        }
        if Action::ALL.iter().any(|a| self.durations.of(*a) == 0) {
            return Err(Error::Config("action durations must be at least 1 s".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub seed: u64,
    pub object: EntityId,
    pub goal_place: EntityId,
    pub scenario: FailureScenario,
    pub layout: String,
    pub world: WorldConfig,
}

impl EpisodeConfig {
    pub fn new(seed: u64, object: &str, goal_place: &str, scenario: FailureScenario) -> Result<Self> {
        let cfg = EpisodeConfig {
            seed,
            object: EntityId::new(object)?,
            goal_place: EntityId::new(goal_place)?,
            scenario,
            layout: world::DEFAULT_LAYOUT.to_string(),
            world: WorldConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.object.is_object() {
            return Err(Error::Config(format!("`{}` is not an object of interest", self.object)));
        }
        if !self.goal_place.is_place() {
            return Err(Error::Config(format!("`{}` is not a place", self.goal_place)));
        }
        world::preset(&self.layout)?;
        self.world.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failed(Action),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub config: EpisodeConfig,
    pub snapshots: Vec<Snapshot>,
    pub outcome: Outcome,
}

impl Episode {
    /// Index of the first snapshot with an errored task state.
    pub fn failure_index(&self) -> Option<usize> {
        self.snapshots.iter().position(is_failure)
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("episode has at least one snapshot")
    }
}
