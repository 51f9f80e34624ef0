//! Line-delimited JSON episode traces: one header line, then one line per
//! snapshot.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::exec::Plan;
use super::{
    is_failure, AgentKinematics, EntityId, Episode, EpisodeConfig, Outcome, Pose3, Snapshot,
    TaskKey, TaskStates, TaskStatus, WorldFlags, SAMPLE_HZ,
};
use crate::codec::{self, d9, un9, Decimal9, SCHEMA_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub schema_version: u32,
    pub config: EpisodeConfig,
    pub sample_hz: u32,
    pub config_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TaskStateLine {
    k_grasp: Option<i8>,
    k_findgrasp: Option<i8>,
    k_move: Option<i8>,
    k_pick: Option<i8>,
    k_detect: Option<i8>,
    k_seg: Option<i8>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotLine {
    t: u32,
    entities: BTreeMap<EntityId, [Decimal9; 3]>,
    vel_ang: [Decimal9; 3],
    vel_lin: [Decimal9; 3],
    pos: [Decimal9; 3],
    task_states: TaskStateLine,
    believed_pos: [Decimal9; 3],
    flags: WorldFlags,
}

impl From<&Snapshot> for SnapshotLine {
    fn from(s: &Snapshot) -> Self {
        let k = |key: TaskKey| s.task_states.get(key).code();
        SnapshotLine {
            t: s.t,
            entities: s
                .entity_locations
                .iter()
                .map(|(e, p)| (e.clone(), d9(p.to_array())))
                .collect(),
            vel_ang: d9(s.kinematics.angular_velocity),
            vel_lin: d9(s.kinematics.linear_velocity),
            pos: d9(s.kinematics.position.to_array()),
            task_states: TaskStateLine {
                k_grasp: k(TaskKey::Grasp),
                k_findgrasp: k(TaskKey::FindGrasp),
                k_move: k(TaskKey::Move),
                k_pick: k(TaskKey::Pick),
                k_detect: k(TaskKey::Detect),
                k_seg: k(TaskKey::Seg),
            },
            believed_pos: d9(s.believed_position.to_array()),
            flags: s.flags,
        }
    }
}

impl TryFrom<SnapshotLine> for Snapshot {
    type Error = Error;
    fn try_from(l: SnapshotLine) -> Result<Self> {
        let ts = &l.task_states;
        let mut states = TaskStates::default();
        for (key, code) in [
            (TaskKey::Grasp, ts.k_grasp),
            (TaskKey::FindGrasp, ts.k_findgrasp),
            (TaskKey::Move, ts.k_move),
            (TaskKey::Pick, ts.k_pick),
            (TaskKey::Detect, ts.k_detect),
            (TaskKey::Seg, ts.k_seg),
        ] {
            states.set(key, TaskStatus::from_code(code)?);
        }
        Ok(Snapshot {
            t: l.t,
            entity_locations: l
                .entities
                .into_iter()
                .map(|(e, p)| (e, Pose3::from_array(un9(p))))
                .collect(),
            kinematics: AgentKinematics {
                angular_velocity: un9(l.vel_ang),
                linear_velocity: un9(l.vel_lin),
                position: Pose3::from_array(un9(l.pos)),
            },
            task_states: states,
            believed_position: Pose3::from_array(un9(l.believed_pos)),
            flags: l.flags,
        })
    }
}

pub fn write_episode<W: Write>(w: &mut W, episode: &Episode, config_digest: &str) -> Result<()> {
    let header = EpisodeHeader {
        schema_version: SCHEMA_VERSION,
        config: episode.config.clone(),
        sample_hz: SAMPLE_HZ,
        config_digest: config_digest.to_string(),
    };
    codec::write_line(w, &header)?;
    for s in &episode.snapshots {
        codec::write_line(w, &SnapshotLine::from(s))?;
    }
    Ok(())
}

pub fn save_episode(path: &Path, episode: &Episode, config_digest: &str) -> Result<()> {
    let mut w = codec::create(path)?;
    write_episode(&mut w, episode, config_digest)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_episode(path: &Path) -> Result<Episode> {
    let lines = codec::lines(codec::open(path)?, path)?;
    let (head, rest) = lines
        .split_first()
        .ok_or_else(|| Error::Schema(format!("{}: empty episode file", path.display())))?;
    let header: EpisodeHeader = codec::parse(head)?;
    codec::check_schema(header.schema_version, &path.display().to_string())?;
    let snapshots = rest
        .iter()
        .map(|l| codec::parse::<SnapshotLine>(l).and_then(Snapshot::try_from))
        .collect::<Result<Vec<_>>>()?;
    if snapshots.is_empty() {
        return Err(Error::Schema(format!("{}: no snapshots", path.display())));
    }
    let outcome = match snapshots.iter().find(|s| is_failure(s)) {
        Some(s) => Outcome::Failed(
            Plan::default()
                .action_at(s.t, &header.config)
                .ok_or_else(|| Error::Schema(format!("failure at t={} outside the plan", s.t)))?,
        ),
        None => Outcome::Success,
    };
    Ok(Episode {
        config: header.config,
        snapshots,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_episode, FailureScenario};

    #[test]
    fn episode_round_trips_through_jsonl() {
        let cfg = EpisodeConfig::new(17, "ice cream", "dining table", FailureScenario::MisLocalization).unwrap();
        let ep = run_episode(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ep.jsonl");
        save_episode(&path, &ep, "abc").unwrap();
        let back = load_episode(&path).unwrap();
        assert_eq!(back.outcome, ep.outcome);
        assert_eq!(back.snapshots.len(), ep.snapshots.len());
        for (a, b) in back.snapshots.iter().zip(&ep.snapshots) {
            assert_eq!(a.task_states, b.task_states);
            assert!(a.kinematics.position.distance(b.kinematics.position) < 1e-7);
        }
    }

    #[test]
    fn snapshot_line_field_order_is_fixed() {
        let cfg = EpisodeConfig::new(1, "cup", "dining table", FailureScenario::NoFailure).unwrap();
        let ep = run_episode(&cfg).unwrap();
        let mut buf = Vec::new();
        write_episode(&mut buf, &ep, "d").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().nth(1).unwrap();
        let order = ["\"t\"", "\"entities\"", "\"vel_ang\"", "\"vel_lin\"", "\"pos\"",
            "\"task_states\"", "\"believed_pos\"", "\"flags\""];
        let idx: Vec<usize> = order.iter().map(|k| first.find(k).unwrap()).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(first.contains("\"k_grasp\":null"));
    }

    #[test]
    fn rejects_other_schema_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ep.jsonl");
        let cfg = EpisodeConfig::new(1, "cup", "dining table", FailureScenario::NoFailure).unwrap();
        let header = EpisodeHeader { schema_version: 99, config: cfg, sample_hz: 1, config_digest: String::new() };
        std::fs::write(&path, serde_json::to_string(&header).unwrap() + "\n").unwrap();
        assert!(matches!(load_episode(&path), Err(Error::Schema(_))));
    }
}
