use serde::{Deserialize, Serialize};

use super::templates::{failure_phrase, success_phrase, ExplanationClass, ExplanationStyle};
use crate::error::{Error, Result};
use crate::featurizer::{extract, forward_fill, FeatureVector};
use crate::sim::{is_failure, Episode, FailureScenario, TaskKey, TaskStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub episode_id: String,
    pub t: u32,
    pub features: FeatureVector,
    /// Target phrase; the model's token sequence is this plus `<eos>`.
    pub target: String,
    pub class: ExplanationClass,
    /// Scenario of the source episode.
    pub scenario: FailureScenario,
}

impl LabeledExample {
    /// Unique id of the example within a dataset.
    pub fn id(&self) -> String {
        format!("{}@{}", self.episode_id, self.t)
    }
}

/// Which ticks receive a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Ticks where an action newly completes, plus the failure tick.
    #[default]
    Milestones,
    /// Every tick after the initial one.
    EveryTick,
}

fn newly_completed(prev: &crate::sim::TaskStates, cur: &crate::sim::TaskStates) -> Option<TaskKey> {
    TaskKey::ALL
        .into_iter()
        .find(|k| cur.get(*k) == TaskStatus::Completed && prev.get(*k) != TaskStatus::Completed)
}

fn active(cur: &crate::sim::TaskStates) -> Option<TaskKey> {
    TaskKey::ALL.into_iter().find(|k| cur.get(*k) == TaskStatus::Active)
}

/// Labels the ticks of `episode` with success or failure phrases.
pub fn annotate(
    episode: &Episode,
    episode_id: &str,
    style: ExplanationStyle,
    sampling: Sampling,
) -> Result<Vec<LabeledExample>> {
    if style == ExplanationStyle::None {
        return Err(Error::Usage("the baseline style cannot be annotated".into()));
    }
    let filled = forward_fill(episode);
    let cfg = &filled.config;
    let place = cfg.goal_place.as_str();
    let failure_class = ExplanationClass::of_scenario(cfg.scenario);

    let mut out = Vec::new();
    let mut current: Option<(String, ExplanationClass)> = None;
    for pair in filled.snapshots.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let milestone = if is_failure(cur) && !is_failure(prev) {
            let class = failure_class.ok_or_else(|| {
                Error::Usage(format!("episode `{episode_id}` fails under a no-failure scenario"))
            })?;
            Some((failure_phrase(style, cfg.scenario)?.to_string(), class))
        } else if is_failure(cur) {
            None
        } else {
            newly_completed(&prev.task_states, &cur.task_states)
                .map(|k| (success_phrase(k, place), ExplanationClass::Correct))
        };

        let label = match (&milestone, sampling) {
            (Some(m), _) => {
                current = Some(m.clone());
                Some(m.clone())
            }
            (None, Sampling::Milestones) => None,
            (None, Sampling::EveryTick) => current.clone().or_else(|| {
                active(&cur.task_states).map(|k| (success_phrase(k, place), ExplanationClass::Correct))
            }),
        };
        if let Some((target, class)) = label {
            out.push(LabeledExample {
                episode_id: episode_id.to_string(),
                t: cur.t,
                features: extract(cur, &cfg.object, &cfg.goal_place, cfg.world.goal_radius)?,
                target,
                class,
                scenario: cfg.scenario,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_episode, EpisodeConfig};

    fn episode(s: FailureScenario) -> Episode {
        run_episode(&EpisodeConfig::new(5, "milk", "dining table", s).unwrap()).unwrap()
    }

    fn failure_label(s: FailureScenario, style: ExplanationStyle) -> String {
        let ex = annotate(&episode(s), "e", style, Sampling::Milestones).unwrap();
        let last = ex.last().unwrap();
        assert_eq!(Some(last.class), ExplanationClass::of_scenario(s));
        last.target.clone()
    }

    #[test]
    fn occluded_labels_in_both_styles() {
        assert_eq!(
            failure_label(FailureScenario::Occluded, ExplanationStyle::ContextBased),
            "could not detect the desired object because the desired object is occluded"
        );
        assert_eq!(
            failure_label(FailureScenario::Occluded, ExplanationStyle::ActionBased),
            "could not detect the object"
        );
    }

    #[test]
    fn segment_completion_label() {
        let ex = annotate(&episode(FailureScenario::NotPresent), "e", ExplanationStyle::ContextBased, Sampling::Milestones)
            .unwrap();
        let targets: Vec<&str> = ex.iter().map(|e| e.target.as_str()).collect();
        assert_eq!(
            targets,
            [
                "robot moving to the dining table",
                "robot has segmented objects in the scene",
                "could not detect the desired object because the desired object is not present where the robot is looking",
            ]
        );
        assert_eq!(ex[1].features.task_states[TaskKey::Seg.index()], Some(1));
    }

    #[test]
    fn baseline_style_is_rejected() {
        assert!(annotate(&episode(FailureScenario::Occluded), "e", ExplanationStyle::None, Sampling::Milestones).is_err());
    }

    #[test]
    fn success_episode_labels_every_milestone() {
        let ex = annotate(&episode(FailureScenario::NoFailure), "e", ExplanationStyle::ContextBased, Sampling::Milestones)
            .unwrap();
        assert_eq!(ex.len(), 6);
        assert!(ex.iter().all(|e| e.class == ExplanationClass::Correct));
        assert_eq!(ex.last().unwrap().target, "robot has picked and placed the desired object");
    }

    #[test]
    fn every_tick_sampling_labels_all_ticks() {
        let ep = episode(FailureScenario::Controller);
        let ex = annotate(&ep, "e", ExplanationStyle::ContextBased, Sampling::EveryTick).unwrap();
        assert_eq!(ex.len(), ep.snapshots.len() - 1);
        assert_eq!(ex[0].target, "robot moving to the dining table");
        assert_eq!(ex.last().unwrap().class, ExplanationClass::Controller);
    }

    #[test]
    fn annotation_is_deterministic() {
        let ep = episode(FailureScenario::TooFarAway);
        let a = annotate(&ep, "e", ExplanationStyle::ContextBased, Sampling::Milestones).unwrap();
        let b = annotate(&ep, "e", ExplanationStyle::ContextBased, Sampling::Milestones).unwrap();
        assert_eq!(a, b);
    }
}
