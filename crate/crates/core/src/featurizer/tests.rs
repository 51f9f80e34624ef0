use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::sim::{
    run_episode, AgentKinematics, EpisodeConfig, FailureScenario, Pose3, TaskStates, WorldFlags,
};

fn id(name: &str) -> EntityId {
    EntityId::new(name).unwrap()
}

fn bare_snapshot(entities: &[(&str, [f64; 3])]) -> Snapshot {
    Snapshot {
        t: 0,
        entity_locations: entities.iter().map(|(n, p)| (id(n), Pose3::from_array(*p))).collect::<BTreeMap<_, _>>(),
        kinematics: AgentKinematics::at_rest(Pose3::ORIGIN),
        task_states: TaskStates::default(),
        believed_position: Pose3::ORIGIN,
        flags: WorldFlags::default(),
    }
}

fn failure_features(scenario: FailureScenario, object: &str, seed: u64) -> FeatureVector {
    let cfg = EpisodeConfig::new(seed, object, "dining table", scenario).unwrap();
    let ep = forward_fill(&run_episode(&cfg).unwrap());
    let s = &ep.snapshots[ep.failure_index().unwrap()];
    extract(s, &cfg.object, &cfg.goal_place, cfg.world.goal_radius).unwrap()
}

#[test]
fn empty_goal_area_gives_empty_list_and_empty_token() {
    let s = bare_snapshot(&[("dining table", [3.0, 2.0, 0.75]), ("cup", [-1.0, 3.0, 0.9])]);
    let objs = objects_at_goal(&s, &id("dining table"), 1.0).unwrap();
    assert!(objs.is_empty());
    let fv = extract(&s, &id("cup"), &id("dining table"), 1.0).unwrap();
    let mi = MaskedInput::from_features(&fv, None).unwrap();
    assert_eq!(mi.entity_tokens, vec![empty_entity_token()]);
}

#[test]
fn unknown_goal_place_is_usage_error() {
    let s = bare_snapshot(&[("cup", [0.0, 0.0, 0.0])]);
    assert!(matches!(objects_at_goal(&s, &id("dining table"), 1.0), Err(Error::Usage(_))));
}

#[test]
fn objects_at_goal_sorted_and_excludes_places() {
    let s = bare_snapshot(&[
        ("dining table", [0.0, 0.0, 0.0]),
        ("milk", [0.2, 0.0, 0.0]),
        ("bottle", [0.0, 0.3, 0.0]),
        ("cup", [5.0, 0.0, 0.0]),
    ]);
    let objs = objects_at_goal(&s, &id("dining table"), 1.0).unwrap();
    assert_eq!(objs, vec![id("bottle"), id("milk")]);
}

#[test]
fn pythagorean_agent_to_object() {
    let s = bare_snapshot(&[("dining table", [10.0, 0.0, 0.0]), ("cup", [3.0, 4.0, 0.0])]);
    let (_, rel_o_objg, rel_a_o) = relative_features(&s, &id("cup"), &id("dining table"), &[]);
    assert_eq!(rel_a_o, Some(5.0));
    assert_eq!(rel_o_objg, None);
}

#[test]
fn lone_object_has_empty_neighbor_distance() {
    let s = bare_snapshot(&[("dining table", [0.0, 0.0, 0.0]), ("cup", [0.1, 0.0, 0.0])]);
    let (_, rel_o_objg, _) = relative_features(&s, &id("cup"), &id("dining table"), &[id("cup")]);
    assert_eq!(rel_o_objg, None);
}

#[test]
fn forward_fill_column_examples() {
    assert_eq!(
        forward_fill_column(&[None, Some(0), None, Some(1)]),
        vec![None, Some(0), Some(0), Some(1)]
    );
    assert_eq!(forward_fill_column(&[None, None, None]), vec![None, None, None]);
}

#[test]
fn filled_move_column_is_monotone() {
    for scenario in FailureScenario::FAILING {
        let cfg = EpisodeConfig::new(2, "milk", "dining table", scenario).unwrap();
        let ep = forward_fill(&run_episode(&cfg).unwrap());
        let col: Vec<Option<i8>> = ep.snapshots.iter().map(|s| s.task_states.get(TaskKey::Move).code()).collect();
        let end = ep.failure_index().unwrap_or(col.len());
        let defined: Vec<i8> = col[..end].iter().flatten().copied().collect();
        assert!(defined.windows(2).all(|w| w[0] <= w[1]), "{scenario}: {col:?}");
        // Only the leading tick may be undefined after filling.
        assert!(col[1..].iter().all(Option::is_some));
    }
}

#[test]
fn initial_snapshot_features() {
    let cfg = EpisodeConfig::new(4, "milk", "dining table", FailureScenario::NoFailure).unwrap();
    let ep = forward_fill(&run_episode(&cfg).unwrap());
    let fv = extract(&ep.snapshots[0], &cfg.object, &cfg.goal_place, 1.0).unwrap();
    assert_eq!(fv.v_ang, 0.0);
    assert_eq!(fv.v_lin, 0.0);
    assert!(fv.task_states.iter().all(Option::is_none));
    let mi = MaskedInput::from_features(&fv, None).unwrap();
    assert_eq!(&mi.mask[5..11], &[false; 6]);
}

#[test]
fn nominal_detect_tick_has_object_at_goal() {
    let cfg = EpisodeConfig::new(4, "bottle", "dining table", FailureScenario::NoFailure).unwrap();
    let ep = run_episode(&cfg).unwrap();
    let detect_done = ep
        .snapshots
        .iter()
        .find(|s| s.task_states.get(TaskKey::Detect) == TaskStatus::Completed)
        .unwrap();
    let objs = objects_at_goal(detect_done, &cfg.goal_place, 1.0).unwrap();
    assert!(objs.contains(&cfg.object));
}

#[test]
fn occluded_and_not_present_signatures() {
    for seed in 0..10 {
        let occ = failure_features(FailureScenario::Occluded, "cup", seed);
        assert!(occ.object_present);
        assert_eq!(occ.task_states[TaskKey::Detect.index()], Some(-1));
        assert!(occ.entities.contains(&id(crate::sim::OCCLUDER)));

        let np = failure_features(FailureScenario::NotPresent, "cup", seed);
        assert!(!np.object_present);
        assert!(!np.entities.contains(&id("cup")));
        assert_eq!(np.task_states[TaskKey::Detect.index()], Some(-1));
    }
}

#[test]
fn scenario_signatures_at_failure_tick() {
    let world = crate::sim::WorldConfig::default();
    for seed in 0..10 {
        let far = failure_features(FailureScenario::TooFarAway, "milk", seed);
        assert!(far.rel_a_o.unwrap() > world.r_max);
        let close = failure_features(FailureScenario::CloseToOthers, "milk", seed);
        assert!(close.rel_o_objg.unwrap() < world.d_clutter);
        assert!(close.rel_a_o.unwrap() <= world.r_max);
        let lost = failure_features(FailureScenario::MisLocalization, "milk", seed);
        assert!(lost.rel_a_goal.unwrap() > world.d_misloc + world.standoff);
        let stuck = failure_features(FailureScenario::Controller, "milk", seed);
        assert!(stuck.v_lin < 1e-3 && stuck.v_ang < 1e-3);
        assert_eq!(stuck.task_states[TaskKey::Move.index()], Some(-1));
    }
}

#[test]
fn extract_is_pure() {
    let cfg = EpisodeConfig::new(9, "cup", "dining table", FailureScenario::CloseToOthers).unwrap();
    let ep = forward_fill(&run_episode(&cfg).unwrap());
    for s in &ep.snapshots {
        let a = extract(s, &cfg.object, &cfg.goal_place, 1.0).unwrap();
        let b = extract(s, &cfg.object, &cfg.goal_place, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.object_present, a.entities.contains(&cfg.object));
    }
}

#[test]
fn raw_round_trip() {
    let fv = failure_features(FailureScenario::TooFarAway, "coke can", 1);
    let back = FeatureVector::from_raw(fv.entities.clone(), &fv.raw(), fv.object.clone()).unwrap();
    assert_eq!(back, fv);
}

#[test]
fn standardizer_ignores_empty_values() {
    let mut a = failure_features(FailureScenario::Occluded, "cup", 1);
    a.rel_o_objg = None;
    let mut b = a.clone();
    b.rel_o_objg = Some(2.0);
    let mut c = a.clone();
    c.rel_o_objg = Some(4.0);
    let s = Standardizer::fit([&a, &b, &c]);
    assert_eq!(s.mean[1], 3.0);
    assert_eq!(s.std[1], 1.0);
}

#[test]
fn constant_feature_stays_off_the_sentinel() {
    let mut a = failure_features(FailureScenario::TooFarAway, "bottle", 1);
    let mut b = a.clone();
    a.rel_o_objg = Some(1.0);
    b.rel_o_objg = Some(1.0);
    let s = Standardizer::fit([&a, &b]);
    assert_eq!((s.mean[1], s.std[1]), (0.0, 1.0));
    let mi = MaskedInput::from_features(&a, Some(&s)).unwrap();
    assert!(mi.mask[1] && mi.values[1] != 0.0);
}

proptest! {
    #[test]
    fn masked_sentinel_never_leaks(sentinel in -1e6f64..1e6, rel in proptest::option::of(0.0f64..10.0)) {
        let mut fv = failure_features(FailureScenario::NotPresent, "bottle", 3);
        fv.rel_o_objg = rel;
        let mi = MaskedInput::from_features(&fv, None).unwrap();
        let mut perturbed = mi.clone();
        for (v, m) in perturbed.values.iter_mut().zip(&perturbed.mask) {
            if !*m {
                *v = sentinel;
            }
        }
        prop_assert_eq!(mi.unmasked(), perturbed.unmasked());
        prop_assert_eq!(mi.values.len(), mi.mask.len());
        for (v, m) in mi.values.iter().zip(&mi.mask) {
            if !*m {
                prop_assert_eq!(*v, 0.0);
            }
        }
    }
}
