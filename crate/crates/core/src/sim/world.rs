use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    norm, sub, EntityId, FailureScenario, Pose3, WorldConfig, BACKGROUND, CLUTTER, OBJECTS,
    OCCLUDER, PLACES,
};
use crate::error::{Error, Result};

pub const DEFAULT_LAYOUT: &str = "kitchen";

/// Named place arrangements. Place poses are surface centers.
const PRESETS: [(&str, [[f64; 3]; 2]); 2] = [
    ("kitchen", [[3.0, 2.0, 0.75], [-1.5, 3.5, 0.9]]),
    ("studio", [[2.5, -1.5, 0.75], [0.5, 3.0, 0.9]]),
];

const TARGET_PULL: f64 = 0.15;
const TARGET_JITTER: f64 = 0.08;
const NEIGHBOR_RADIUS: f64 = 0.45;
const MIN_SPACING: f64 = 0.2;
const OCCLUDER_GAP: f64 = 0.12;

pub fn preset(name: &str) -> Result<[Pose3; 2]> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, p)| [Pose3::from_array(p[0]), Pose3::from_array(p[1])])
        .ok_or_else(|| Error::Config(format!("unknown world layout `{name}`")))
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Entity poses plus the fault state a scenario leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldLayout {
    pub name: String,
    pub target: EntityId,
    pub goal_place: EntityId,
    pub entities: BTreeMap<EntityId, Pose3>,
    /// Added to both the navigation target and the pose estimate.
    pub localization_offset: [f64; 3],
    pub motor_fault: bool,
    pub occluded: bool,
}

impl WorldLayout {
    pub fn pose(&self, e: &EntityId) -> Pose3 {
        self.entities[e]
    }

    pub fn goal_pose(&self) -> Pose3 {
        self.pose(&self.goal_place)
    }

    pub fn other_place(&self) -> EntityId {
        let other = PLACES.iter().find(|p| **p != self.goal_place.as_str()).expect("two places");
        EntityId::known(other)
    }

    fn movable_near(&self, center: Pose3, radius: f64, skip: &EntityId) -> Vec<Pose3> {
        self.entities
            .iter()
            .filter(|(e, p)| !e.is_place() && *e != skip && p.distance(center) <= radius + 0.5)
            .map(|(_, p)| *p)
            .collect()
    }
}

/// Planar unit vector from the world origin toward `p`.
fn outward(p: Pose3) -> [f64; 3] {
    let n = p.x.hypot(p.y);
    [p.x / n, p.y / n, 0.0]
}

/// Where the agent stands to manipulate objects on `place`; `z` is the
/// surface height so reach is measured from the arm base.
pub fn standpoint(place: Pose3, world: &WorldConfig) -> Pose3 {
    let u = outward(place);
    Pose3::new(place.x - world.standoff * u[0], place.y - world.standoff * u[1], place.z)
}

/// Agent position (on the floor) for the standpoint of `place`.
pub fn floor_standpoint(place: Pose3, world: &WorldConfig) -> Pose3 {
    let s = standpoint(place, world);
    Pose3::new(s.x, s.y, 0.0)
}

fn polar(r: f64, theta: f64) -> [f64; 3] {
    [r * theta.cos(), r * theta.sin(), 0.0]
}

fn sample_disk(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 3] {
    let r = radius * rng.gen::<f64>().sqrt();
    polar(r, rng.gen_range(0.0..2.0 * PI))
}

/// Rejection-samples a point on `center`'s surface at least `spacing` away
/// from every pose in `avoid`. Falls back to the last draw.
fn place_spaced(
    rng: &mut ChaCha8Rng,
    center: Pose3,
    radius: f64,
    avoid: &[Pose3],
    spacing: f64,
) -> Pose3 {
    let mut candidate = center;
    for _ in 0..200 {
        candidate = center.offset(sample_disk(rng, radius));
        if avoid.iter().all(|p| p.distance(candidate) >= spacing) {
            break;
        }
    }
    candidate
}

/// Builds the fault-free layout for `target` on `goal_place`.
pub fn build_layout(
    name: &str,
    target: &EntityId,
    goal_place: &EntityId,
    world: &WorldConfig,
    rng: &mut ChaCha8Rng,
) -> Result<WorldLayout> {
    let places = preset(name)?;
    let mut entities = BTreeMap::new();
    for (place, pose) in PLACES.iter().zip(places) {
        entities.insert(EntityId::known(place), pose);
    }
    let goal = entities
        .get(goal_place)
        .copied()
        .ok_or_else(|| Error::Config(format!("`{goal_place}` is not a place")))?;
    let other = *entities
        .iter()
        .find(|(e, _)| e.is_place() && *e != goal_place)
        .map(|(_, p)| p)
        .expect("two places");

    let u = outward(goal);
    let target_pose = goal.offset([
        -TARGET_PULL * u[0] + rng.gen_range(-TARGET_JITTER..TARGET_JITTER),
        -TARGET_PULL * u[1] + rng.gen_range(-TARGET_JITTER..TARGET_JITTER),
        0.0,
    ]);
    entities.insert(target.clone(), target_pose);

    let mut others: Vec<&str> = OBJECTS.iter().copied().filter(|o| *o != target.as_str()).collect();
    others.shuffle(rng);
    let n_at_goal = rng.gen_range(1..=2);
    let mut at_goal = vec![target_pose];
    let mut at_other = Vec::new();
    for (i, obj) in others.into_iter().enumerate() {
        let pose = if i < n_at_goal {
            let p = place_spaced(rng, goal, NEIGHBOR_RADIUS.min(0.5 * world.goal_radius), &at_goal, MIN_SPACING);
            at_goal.push(p);
            p
        } else {
            let p = place_spaced(rng, other, 0.35, &at_other, MIN_SPACING);
            at_other.push(p);
            p
        };
        entities.insert(EntityId::known(obj), pose);
    }
    if rng.gen_bool(0.5) {
        let bg = BACKGROUND[rng.gen_range(0..BACKGROUND.len())];
        let p = place_spaced(rng, other, 0.35, &at_other, MIN_SPACING);
        entities.insert(EntityId::known(bg), p);
    }

    Ok(WorldLayout {
        name: name.to_string(),
        target: target.clone(),
        goal_place: goal_place.clone(),
        entities,
        localization_offset: [0.0; 3],
        motor_fault: false,
        occluded: false,
    })
}

/// Applies the world mutation that produces `scenario`.
pub fn inject_fault(
    mut layout: WorldLayout,
    scenario: FailureScenario,
    world: &WorldConfig,
    rng: &mut ChaCha8Rng,
) -> WorldLayout {
    let goal = layout.goal_pose();
    let target = layout.target.clone();
    let target_pose = layout.pose(&target);
    match scenario {
        FailureScenario::NoFailure => {}
        FailureScenario::TooFarAway => {
            // Far side of the place: beyond reach from the standpoint but
            // still inside the goal area.
            let u = outward(goal);
            let stand = standpoint(goal, world);
            let neighbors = layout.movable_near(goal, world.goal_radius, &target);
            let mut pose = target_pose;
            for _ in 0..200 {
                let along = world.r_max + rng.gen_range(0.05..0.35);
                let lateral = rng.gen_range(-0.15..0.15);
                pose = stand.offset([along * u[0] - lateral * u[1], along * u[1] + lateral * u[0], 0.0]);
                if neighbors.iter().all(|p| p.distance(pose) >= MIN_SPACING) {
                    break;
                }
            }
            layout.entities.insert(target, pose);
        }
        FailureScenario::CloseToOthers => {
            let n = rng.gen_range(1..=3);
            let mut clutter = CLUTTER.to_vec();
            clutter.shuffle(rng);
            for name in clutter.into_iter().take(n) {
                let r = world.d_clutter * rng.gen_range(0.4..0.9);
                let pose = target_pose.offset(polar(r, rng.gen_range(0.0..2.0 * PI)));
                layout.entities.insert(EntityId::known(name), pose);
            }
        }
        FailureScenario::NotPresent => {
            let other = layout.pose(&layout.other_place());
            let avoid = layout.movable_near(other, 0.35, &target);
            let pose = place_spaced(rng, other, 0.35, &avoid, MIN_SPACING);
            layout.entities.insert(target, pose);
        }
        FailureScenario::Occluded => {
            let stand = standpoint(goal, world);
            let d = sub(stand.to_array(), target_pose.to_array());
            let n = d[0].hypot(d[1]);
            let pose = target_pose.offset([OCCLUDER_GAP * d[0] / n, OCCLUDER_GAP * d[1] / n, 0.0]);
            layout.entities.insert(EntityId::known(OCCLUDER), pose);
            layout.occluded = true;
        }
        FailureScenario::MisLocalization => {
            let r = world.d_misloc * rng.gen_range(1.0..1.5);
            layout.localization_offset = polar(r, rng.gen_range(0.0..2.0 * PI));
        }
        FailureScenario::Controller => {
            layout.motor_fault = true;
        }
    }
    debug_assert!(norm(layout.localization_offset).is_finite());
    layout
}
