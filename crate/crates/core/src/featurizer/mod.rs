//! Snapshot-to-model-input conversion.
//!
//! The encoder sees the entities at the goal place; the decoder gets twelve
//! raw numbers (three distances, two speeds, six task states, object
//! presence) plus the desired object. Missing values are `None` here and
//! become masked zeros in [`MaskedInput`].

mod standardize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{EntityId, Episode, Snapshot, TaskKey, TaskStatus, OBJECTS};

pub use standardize::Standardizer;

/// Number of raw features fed to the decoder.
pub const RAW_DIM: usize = 12;

pub const RAW_NAMES: [&str; RAW_DIM] = [
    "rel_a_goal",
    "rel_o_objg",
    "rel_a_o",
    "v_ang",
    "v_lin",
    "k_grasp",
    "k_findgrasp",
    "k_move",
    "k_pick",
    "k_detect",
    "k_seg",
    "o_p",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Entities at the goal place, sorted by name.
    pub entities: Vec<EntityId>,
    pub rel_a_goal: Option<f64>,
    pub rel_o_objg: Option<f64>,
    pub rel_a_o: Option<f64>,
    pub v_ang: f64,
    pub v_lin: f64,
    /// Task-state codes in [`TaskKey::ALL`] order; `None` is Empty.
    pub task_states: [Option<i8>; 6],
    pub object_present: bool,
    pub object: EntityId,
}

impl FeatureVector {
    /// The raw feature block in [`RAW_NAMES`] order.
    pub fn raw(&self) -> [Option<f64>; RAW_DIM] {
        let k = |i: usize| self.task_states[i].map(f64::from);
        [
            self.rel_a_goal,
            self.rel_o_objg,
            self.rel_a_o,
            Some(self.v_ang),
            Some(self.v_lin),
            k(0),
            k(1),
            k(2),
            k(3),
            k(4),
            k(5),
            Some(if self.object_present { 1.0 } else { 0.0 }),
        ]
    }

    /// Rebuilds a vector from its serialized parts.
    pub fn from_raw(entities: Vec<EntityId>, raw: &[Option<f64>], object: EntityId) -> Result<Self> {
        if raw.len() != RAW_DIM {
            return Err(Error::Schema(format!("expected {RAW_DIM} raw features, got {}", raw.len())));
        }
        let code = |v: Option<f64>| -> Result<Option<i8>> {
            match v {
                None => Ok(None),
                Some(x) if x == -1.0 || x == 0.0 || x == 1.0 => Ok(Some(x as i8)),
                Some(x) => Err(Error::Schema(format!("invalid task-state value {x}"))),
            }
        };
        let required = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Schema(format!("feature {name} may not be null")))
        };
        let mut task_states = [None; 6];
        for (i, slot) in task_states.iter_mut().enumerate() {
            *slot = code(raw[5 + i])?;
        }
        Ok(FeatureVector {
            entities,
            rel_a_goal: raw[0],
            rel_o_objg: raw[1],
            rel_a_o: raw[2],
            v_ang: required(raw[3], "v_ang")?,
            v_lin: required(raw[4], "v_lin")?,
            task_states,
            object_present: required(raw[11], "o_p")? != 0.0,
            object,
        })
    }
}

/// Entities (not places) within `radius` of `goal_place`, sorted by name.
pub fn objects_at_goal(snapshot: &Snapshot, goal_place: &EntityId, radius: f64) -> Result<Vec<EntityId>> {
    let goal = snapshot
        .location(goal_place)
        .ok_or_else(|| Error::Usage(format!("unknown goal place `{goal_place}`")))?;
    // BTreeMap iteration is already name-ordered.
    Ok(snapshot
        .entity_locations
        .iter()
        .filter(|(e, p)| !e.is_place() && p.distance(goal) <= radius)
        .map(|(e, _)| e.clone())
        .collect())
}

/// `(rel_a_goal, rel_o_objg, rel_a_o)`. Agent-to-goal uses the believed
/// agent position; the others use true poses.
pub fn relative_features(
    snapshot: &Snapshot,
    object: &EntityId,
    goal_place: &EntityId,
    obj_g: &[EntityId],
) -> (Option<f64>, Option<f64>, Option<f64>) {
    let agent = snapshot.kinematics.position;
    let target = snapshot.location(object);
    let rel_a_goal = snapshot
        .location(goal_place)
        .map(|g| snapshot.believed_position.distance(g));
    let rel_a_o = target.map(|p| agent.distance(p));
    let rel_o_objg = match target {
        Some(p) if obj_g.contains(object) => obj_g
            .iter()
            .filter(|e| *e != object)
            .filter_map(|e| snapshot.location(e))
            .map(|q| q.distance(p))
            .reduce(f64::min),
        _ => None,
    };
    (rel_a_goal, rel_o_objg, rel_a_o)
}

/// Forward-fills each task-state column over undefined ticks.
pub fn forward_fill(episode: &Episode) -> Episode {
    let mut out = episode.clone();
    let mut last = [TaskStatus::Undefined; 6];
    for s in &mut out.snapshots {
        for key in TaskKey::ALL {
            let i = key.index();
            match s.task_states.get(key) {
                TaskStatus::Undefined => s.task_states.set(key, last[i]),
                status => last[i] = status,
            }
        }
    }
    out
}

/// Forward-fill over a bare column of codes.
pub fn forward_fill_column(column: &[Option<i8>]) -> Vec<Option<i8>> {
    let mut last = None;
    column
        .iter()
        .map(|v| {
            if v.is_some() {
                last = *v;
            }
            last
        })
        .collect()
}

/// Assembles the feature vector of a forward-filled snapshot.
pub fn extract(snapshot: &Snapshot, object: &EntityId, goal_place: &EntityId, radius: f64) -> Result<FeatureVector> {
    let entities = objects_at_goal(snapshot, goal_place, radius)?;
    let (rel_a_goal, rel_o_objg, rel_a_o) = relative_features(snapshot, object, goal_place, &entities);
    let mut task_states = [None; 6];
    for (slot, (_, status)) in task_states.iter_mut().zip(snapshot.task_states.iter()) {
        *slot = status.code();
    }
    Ok(FeatureVector {
        object_present: entities.contains(object),
        entities,
        rel_a_goal,
        rel_o_objg,
        rel_a_o,
        v_ang: snapshot.kinematics.angular_speed(),
        v_lin: snapshot.kinematics.linear_speed(),
        task_states,
        object: object.clone(),
    })
}

/// Token index of the Empty entity in the encoder vocabulary.
pub fn empty_entity_token() -> usize {
    EntityId::catalog().count()
}

/// Size of the encoder's entity vocabulary: the catalog plus Empty.
pub fn entity_vocab_size() -> usize {
    empty_entity_token() + 1
}

pub fn entity_token(e: &EntityId) -> usize {
    EntityId::catalog()
        .position(|n| n == e.as_str())
        .expect("entity ids come from the catalog")
}

pub fn object_token(e: &EntityId) -> Result<usize> {
    OBJECTS
        .iter()
        .position(|n| *n == e.as_str())
        .ok_or_else(|| Error::Usage(format!("`{e}` is not an object of interest")))
}

/// Model-ready input: numeric block with a parallel mask, plus token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedInput {
    pub values: Vec<f64>,
    /// `true` marks a real value, `false` an Empty slot.
    pub mask: Vec<bool>,
    pub entity_tokens: Vec<usize>,
    pub object_token: usize,
}

impl MaskedInput {
    pub fn from_features(fv: &FeatureVector, standardizer: Option<&Standardizer>) -> Result<Self> {
        let raw = fv.raw();
        let mut values = Vec::with_capacity(RAW_DIM);
        let mut mask = Vec::with_capacity(RAW_DIM);
        for (i, v) in raw.iter().enumerate() {
            match v {
                Some(x) => {
                    values.push(standardizer.map_or(*x, |s| s.apply(i, *x)));
                    mask.push(true);
                }
                None => {
                    values.push(0.0);
                    mask.push(false);
                }
            }
        }
        let entity_tokens = if fv.entities.is_empty() {
            vec![empty_entity_token()]
        } else {
            fv.entities.iter().map(entity_token).collect()
        };
        Ok(MaskedInput {
            values,
            mask,
            entity_tokens,
            object_token: object_token(&fv.object)?,
        })
    }

    /// Values at unmasked positions.
    pub fn unmasked(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| *v)
            .collect()
    }
}

#[cfg(test)]
mod tests;
