use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::world::{build_layout, floor_standpoint, inject_fault, standpoint};
use super::{
    sub, Action, AgentKinematics, Episode, EpisodeConfig, Outcome, Pose3, Snapshot, TaskStates,
    TaskStatus, WorldFlags,
};
use crate::error::{Error, Result};

/// Height an object is raised by `lift`, m.
const LIFT_HEIGHT: f64 = 0.15;

/// Ordered action list executed by the agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan(pub Vec<Action>);

impl Default for Plan {
    fn default() -> Self {
        Plan(Action::ALL.to_vec())
    }
}

impl Plan {
    /// Total ticks needed to complete every action.
    pub fn total_ticks(&self, config: &EpisodeConfig) -> u32 {
        self.0.iter().map(|a| config.world.durations.of(*a)).sum()
    }

    /// Action executing at tick `t` (ticks start at 1).
    pub fn action_at(&self, t: u32, config: &EpisodeConfig) -> Option<Action> {
        self.at_tick(t, config).map(|(a, _, _)| a)
    }

    /// Action executing at tick `t` with its 1-based tick offset and duration.
    fn at_tick(&self, t: u32, config: &EpisodeConfig) -> Option<(Action, u32, u32)> {
        let mut start = 0;
        for &a in &self.0 {
            let d = config.world.durations.of(a);
            if t > start && t <= start + d {
                return Some((a, t - start, d));
            }
            start += d;
        }
        None
    }
}

pub fn is_failure(snapshot: &Snapshot) -> bool {
    snapshot.task_states.errored().is_some()
}

/// Canonical initial state: agent at rest at the origin, every task state
/// undefined, scenario mutations already applied to the world.
pub fn init_state(config: &EpisodeConfig) -> Result<Snapshot> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layout = build_layout(&config.layout, &config.object, &config.goal_place, &config.world, &mut rng)?;
    let layout = inject_fault(layout, config.scenario, &config.world, &mut rng);
    let position = Pose3::ORIGIN;
    Ok(Snapshot {
        t: 0,
        believed_position: position.offset(layout.localization_offset),
        entity_locations: layout.entities,
        kinematics: AgentKinematics::at_rest(position),
        task_states: TaskStates::default(),
        flags: WorldFlags {
            occluded: layout.occluded,
            motor_fault: layout.motor_fault,
        },
    })
}

fn goal_pose(snapshot: &Snapshot, config: &EpisodeConfig) -> Result<Pose3> {
    snapshot
        .location(&config.goal_place)
        .ok_or_else(|| Error::Usage(format!("goal place `{}` missing from snapshot", config.goal_place)))
}

fn target_pose(snapshot: &Snapshot, config: &EpisodeConfig) -> Result<Pose3> {
    snapshot
        .location(&config.object)
        .ok_or_else(|| Error::Usage(format!("object `{}` missing from snapshot", config.object)))
}

/// Where navigation drives the agent: the standpoint, shifted by any
/// localization offset.
fn nav_target(snapshot: &Snapshot, config: &EpisodeConfig) -> Result<Pose3> {
    let offset = sub(snapshot.believed_position.to_array(), snapshot.kinematics.position.to_array());
    Ok(floor_standpoint(goal_pose(snapshot, config)?, &config.world).offset(offset))
}

fn move_kinematics(prev: &Snapshot, config: &EpisodeConfig, tick: u32) -> Result<AgentKinematics> {
    let w = &config.world;
    let gain = if prev.flags.motor_fault { w.motor_fault_gain } else { 1.0 };
    let target = nav_target(prev, config)?;
    let pos = prev.kinematics.position;

    // Turn from the initial heading (+x) toward the travel direction.
    let heading = (target.y - Pose3::ORIGIN.y).atan2(target.x - Pose3::ORIGIN.x);
    let turned = w.turn_rate * f64::from(tick - 1);
    let omega = (heading.abs() - turned).clamp(0.0, w.turn_rate) * heading.signum() * gain;

    let rem = sub(target.to_array(), pos.to_array());
    let dist = super::norm(rem);
    let linear = if dist > 1e-12 {
        let step = (w.move_speed * gain).min(dist);
        [rem[0] / dist * step, rem[1] / dist * step, rem[2] / dist * step]
    } else {
        [0.0; 3]
    };
    Ok(AgentKinematics {
        angular_velocity: [0.0, 0.0, omega],
        linear_velocity: linear,
        position: pos.offset(linear),
    })
}

/// Whether `action` succeeds in the world state `s` at its final tick.
fn action_succeeds(action: Action, s: &Snapshot, config: &EpisodeConfig) -> Result<bool> {
    let w = &config.world;
    let goal = goal_pose(s, config)?;
    Ok(match action {
        Action::Move => s.kinematics.position.distance(nav_target(s, config)?) <= w.arrive_tolerance,
        Action::Segment => {
            s.kinematics.position.planar_distance(floor_standpoint(goal, w)) <= w.view_tolerance
        }
        Action::Detect => target_pose(s, config)?.distance(goal) <= w.goal_radius && !s.flags.occluded,
        Action::Grasp => {
            let t = target_pose(s, config)?;
            let crowded = s
                .entity_locations
                .iter()
                .filter(|(e, _)| !e.is_place() && **e != config.object)
                .any(|(_, p)| p.distance(t) < w.d_clutter);
            t.distance(standpoint(goal, w)) <= w.r_max && !crowded
        }
        Action::FindGrasp | Action::Lift | Action::Place => true,
    })
}

/// Advances execution by one second.
pub fn step(prev: &Snapshot, plan: &Plan, config: &EpisodeConfig) -> Result<Snapshot> {
    if is_failure(prev) {
        return Err(Error::Usage(format!("snapshot at t={} is already failed", prev.t)));
    }
    let t = prev.t + 1;
    let (action, tick, duration) = plan
        .at_tick(t, config)
        .ok_or_else(|| Error::Usage(format!("plan already finished at t={}", prev.t)))?;

    let mut next = prev.clone();
    next.t = t;
    let key = action.key();
    if tick == 1 {
        next.task_states.set(key, TaskStatus::Active);
    }

    next.kinematics = if action == Action::Move {
        move_kinematics(prev, config, tick)?
    } else {
        AgentKinematics::at_rest(prev.kinematics.position)
    };
    let offset = sub(prev.believed_position.to_array(), prev.kinematics.position.to_array());
    next.believed_position = next.kinematics.position.offset(offset);

    if tick == duration {
        match action {
            Action::Lift => {
                if let Some(p) = next.entity_locations.get_mut(&config.object) {
                    p.z += LIFT_HEIGHT;
                }
            }
            Action::Place => {
                if let Some(p) = next.entity_locations.get_mut(&config.object) {
                    p.z -= LIFT_HEIGHT;
                }
            }
            _ => {}
        }
        let status = if action_succeeds(action, &next, config)? {
            // k_pick stays active between lift and place.
            if action == Action::Lift {
                TaskStatus::Active
            } else {
                TaskStatus::Completed
            }
        } else {
            TaskStatus::Errored
        };
        next.task_states.set(key, status);
    }
    Ok(next)
}

/// Runs the default plan from the initial state to a terminal snapshot.
///
/// A failed episode ends one tick after the failure, with the agent halted.
pub fn run_episode(config: &EpisodeConfig) -> Result<Episode> {
    let plan = Plan::default();
    let total = plan.total_ticks(config);
    let mut snapshots = vec![init_state(config)?];
    loop {
        let prev = snapshots.last().expect("nonempty");
        if prev.t >= total {
            break;
        }
        let next = step(prev, &plan, config)?;
        let failed = is_failure(&next);
        snapshots.push(next);
        if failed {
            break;
        }
    }

    let last = snapshots.last().expect("nonempty").clone();
    let outcome = match last.task_states.errored() {
        Some(key) => {
            let (action, _, _) = plan.at_tick(last.t, config).expect("failure inside plan");
            debug_assert_eq!(action.key(), key);
            let mut halted = last;
            halted.t += 1;
            halted.kinematics = AgentKinematics::at_rest(halted.kinematics.position);
            snapshots.push(halted);
            Outcome::Failed(action)
        }
        None => Outcome::Success,
    };
    Ok(Episode {
        config: config.clone(),
        snapshots,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{FailureScenario, TaskKey, OBJECTS};

    fn cfg(scenario: FailureScenario, object: &str, seed: u64) -> EpisodeConfig {
        EpisodeConfig::new(seed, object, "dining table", scenario).unwrap()
    }

    #[test]
    fn initial_state_is_at_rest_and_undefined() {
        let s = init_state(&cfg(FailureScenario::NoFailure, "milk", 1)).unwrap();
        assert_eq!(s.t, 0);
        assert_eq!(s.kinematics, AgentKinematics::at_rest(Pose3::ORIGIN));
        assert!(s.task_states.0.iter().all(|k| *k == TaskStatus::Undefined));
    }

    #[test]
    fn init_state_rejects_unknown_layout() {
        let mut c = cfg(FailureScenario::NoFailure, "milk", 1);
        c.layout = "attic".into();
        assert!(matches!(init_state(&c), Err(Error::Config(_))));
    }

    #[test]
    fn init_state_is_deterministic() {
        let c = cfg(FailureScenario::CloseToOthers, "bottle", 42);
        assert_eq!(init_state(&c).unwrap(), init_state(&c).unwrap());
    }

    #[test]
    fn not_present_moves_cup_out_of_goal_area() {
        let c = cfg(FailureScenario::NotPresent, "cup", 7);
        let s = init_state(&c).unwrap();
        let goal = s.location(&c.goal_place).unwrap();
        assert!(s.location(&c.object).unwrap().distance(goal) > c.world.goal_radius);
    }

    #[test]
    fn no_failure_completes_every_key() {
        let ep = run_episode(&cfg(FailureScenario::NoFailure, "coke can", 3)).unwrap();
        assert_eq!(ep.outcome, Outcome::Success);
        let last = ep.last();
        assert!(last.task_states.all_completed());
        assert_eq!(last.kinematics.linear_speed(), 0.0);
        assert_eq!(last.kinematics.angular_speed(), 0.0);
        assert_eq!(last.t, Plan::default().total_ticks(&ep.config));
    }

    #[test]
    fn controller_fault_barely_moves() {
        let ep = run_episode(&cfg(FailureScenario::Controller, "milk", 8)).unwrap();
        assert_eq!(ep.outcome, Outcome::Failed(Action::Move));
        for s in &ep.snapshots {
            if s.task_states.get(TaskKey::Move) == TaskStatus::Active {
                assert!(s.kinematics.linear_speed() < 1e-3);
                assert!(s.kinematics.angular_speed() < 1e-3);
            }
        }
        let fail = &ep.snapshots[ep.failure_index().unwrap()];
        assert_eq!(fail.task_states.get(TaskKey::Move), TaskStatus::Errored);
    }

    #[test]
    fn nominal_move_has_nonzero_velocity() {
        let ep = run_episode(&cfg(FailureScenario::NoFailure, "milk", 8)).unwrap();
        assert!(ep.snapshots[1].kinematics.linear_speed() > 0.1);
        assert!(ep.snapshots[1].kinematics.angular_speed() > 0.1);
    }

    #[test]
    fn too_far_errors_on_grasp_after_completed_prefix() {
        let ep = run_episode(&cfg(FailureScenario::TooFarAway, "cup", 4)).unwrap();
        assert_eq!(ep.outcome, Outcome::Failed(Action::Grasp));
        let i = ep.failure_index().unwrap();
        let prev = &ep.snapshots[i - 1].task_states;
        assert_eq!(prev.get(TaskKey::Grasp), TaskStatus::Active);
        let fail = &ep.snapshots[i].task_states;
        assert_eq!(fail.get(TaskKey::Grasp), TaskStatus::Errored);
        for k in [TaskKey::Move, TaskKey::Seg, TaskKey::Detect, TaskKey::FindGrasp] {
            assert_eq!(fail.get(k), TaskStatus::Completed);
        }
    }

    #[test]
    fn occluded_milk_fails_on_detect() {
        let ep = run_episode(&cfg(FailureScenario::Occluded, "milk", 0)).unwrap();
        assert_eq!(ep.outcome, Outcome::Failed(Action::Detect));
    }

    #[test]
    fn stepping_a_failed_snapshot_is_usage_error() {
        let c = cfg(FailureScenario::Occluded, "milk", 0);
        let ep = run_episode(&c).unwrap();
        let fail = &ep.snapshots[ep.failure_index().unwrap()];
        assert!(matches!(step(fail, &Plan::default(), &c), Err(Error::Usage(_))));
    }

    #[test]
    fn episode_length_tracks_durations() {
        for scenario in FailureScenario::FAILING {
            let c = cfg(scenario, "bottle", 12);
            let ep = run_episode(&c).unwrap();
            let failed = scenario.failed_action().unwrap();
            let upto: u32 = Action::ALL
                .iter()
                .take_while(|a| **a != failed)
                .chain(std::iter::once(&failed))
                .map(|a| c.world.durations.of(*a))
                .sum();
            let last_t = ep.last().t;
            assert!(last_t.abs_diff(upto) <= 1, "{scenario}: {last_t} vs {upto}");
        }
    }

    #[test]
    fn task_state_invariants_hold_for_all_pairs() {
        for scenario in std::iter::once(FailureScenario::NoFailure).chain(FailureScenario::FAILING) {
            for (i, object) in OBJECTS.iter().enumerate() {
                let ep = run_episode(&cfg(scenario, object, i as u64 * 31 + 5)).unwrap();
                let mut errored_at: Option<TaskStates> = None;
                for (j, s) in ep.snapshots.iter().enumerate() {
                    assert_eq!(s.t as usize, j);
                    assert!(s.task_states.active_count() <= 1);
                    if let Some(frozen) = errored_at {
                        assert_eq!(frozen, s.task_states);
                    } else if is_failure(s) {
                        errored_at = Some(s.task_states);
                    }
                    assert_eq!(
                        s.entity_locations.keys().collect::<Vec<_>>(),
                        ep.snapshots[0].entity_locations.keys().collect::<Vec<_>>()
                    );
                }
            }
        }
    }
}
