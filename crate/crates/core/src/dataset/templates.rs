use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{FailureScenario, TaskKey};

/// How much a failure explanation says.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationStyle {
    /// No explanation at all (the study baseline); cannot be annotated.
    None,
    /// Names the failed action only.
    ActionBased,
    /// Failed action plus the environmental reason.
    ContextBased,
}

impl ExplanationStyle {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "none" => Ok(ExplanationStyle::None),
            "action_based" | "ab" => Ok(ExplanationStyle::ActionBased),
            "context_based" | "cb" => Ok(ExplanationStyle::ContextBased),
            _ => Err(Error::Config(format!("unknown explanation style `{name}`"))),
        }
    }
}

/// The seven evaluation classes, in confusion-matrix order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationClass {
    TooFar,
    CloseTogether,
    NotPresent,
    Occluded,
    Mislocalized,
    Controller,
    Correct,
}

impl ExplanationClass {
    pub const ALL: [ExplanationClass; 7] = [
        ExplanationClass::TooFar,
        ExplanationClass::CloseTogether,
        ExplanationClass::NotPresent,
        ExplanationClass::Occluded,
        ExplanationClass::Mislocalized,
        ExplanationClass::Controller,
        ExplanationClass::Correct,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ExplanationClass::TooFar => "too_far",
            ExplanationClass::CloseTogether => "close_together",
            ExplanationClass::NotPresent => "not_present",
            ExplanationClass::Occluded => "occluded",
            ExplanationClass::Mislocalized => "mislocalized",
            ExplanationClass::Controller => "controller",
            ExplanationClass::Correct => "correct",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Schema(format!("unknown class `{name}`")))
    }

    /// Class of a failing scenario's explanation; `None` for `NoFailure`.
    pub fn of_scenario(s: FailureScenario) -> Option<Self> {
        use FailureScenario::*;
        Some(match s {
            NoFailure => return None,
            TooFarAway => ExplanationClass::TooFar,
            CloseToOthers => ExplanationClass::CloseTogether,
            NotPresent => ExplanationClass::NotPresent,
            Occluded => ExplanationClass::Occluded,
            MisLocalization => ExplanationClass::Mislocalized,
            Controller => ExplanationClass::Controller,
        })
    }

    pub fn scenario(self) -> Option<FailureScenario> {
        FailureScenario::FAILING
            .into_iter()
            .find(|s| Self::of_scenario(*s) == Some(self))
    }

    pub fn is_failure(self) -> bool {
        self != ExplanationClass::Correct
    }
}

impl fmt::Display for ExplanationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Failure explanation for `scenario` in `style`.
pub fn failure_phrase(style: ExplanationStyle, scenario: FailureScenario) -> Result<&'static str> {
    use FailureScenario::*;
    let (ab, cb) = match scenario {
        NoFailure => {
            return Err(Error::Usage("a successful run has no failure explanation".into()))
        }
        TooFarAway => (
            "could not move its arm to the desired object",
            "could not move its arm to the desired object because the desired object is too far away",
        ),
        CloseToOthers => (
            "could not move its arm to the desired object",
            "could not move its arm to the desired object because the desired object is too close to other objects",
        ),
        NotPresent => (
            "could not detect the desired object",
            "could not detect the desired object because the desired object is not present where the robot is looking",
        ),
        Occluded => (
            "could not detect the object",
            "could not detect the desired object because the desired object is occluded",
        ),
        MisLocalization => (
            "could not navigate to the desired object",
            "could not navigate to the desired object because the robot is lost",
        ),
        Controller => (
            "could not navigate to the desired object",
            "could not navigate to the desired object because the robot\u{2019}s motors are malfunctioning",
        ),
    };
    match style {
        ExplanationStyle::ActionBased => Ok(ab),
        ExplanationStyle::ContextBased => Ok(cb),
        ExplanationStyle::None => Err(Error::Usage("the baseline style has no explanation text".into())),
    }
}

/// Phrase announcing that the action tracked by `key` finished.
pub fn success_phrase(key: TaskKey, goal_place: &str) -> String {
    match key {
        TaskKey::Move => format!("robot moving to the {goal_place}"),
        TaskKey::Seg => "robot has segmented objects in the scene".into(),
        TaskKey::Detect => "robot has detected the desired object".into(),
        TaskKey::FindGrasp => "robot has found grasps for the desired object".into(),
        TaskKey::Grasp => "robot has grasped the desired object".into(),
        TaskKey::Pick => "robot has picked and placed the desired object".into(),
    }
}

/// Every canonical phrase with its class, for one style and set of goal places.
#[derive(Debug, Clone)]
pub struct PhraseBook {
    entries: Vec<(String, ExplanationClass)>,
}

impl PhraseBook {
    pub fn new<'a>(style: ExplanationStyle, goal_places: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut entries = Vec::new();
        for s in FailureScenario::FAILING {
            let class = ExplanationClass::of_scenario(s).expect("failing scenario");
            entries.push((failure_phrase(style, s)?.to_string(), class));
        }
        for place in goal_places {
            for key in TaskKey::ALL {
                let p = success_phrase(key, place);
                if !entries.iter().any(|(e, _)| *e == p) {
                    entries.push((p, ExplanationClass::Correct));
                }
            }
        }
        Ok(PhraseBook { entries })
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(p, _)| p.as_str())
    }

    /// Every class whose canonical phrase is exactly `phrase`. Action-based
    /// phrases can be shared by both scenarios of a failure type.
    pub fn classes_of(&self, phrase: &str) -> Vec<ExplanationClass> {
        self.entries
            .iter()
            .filter(|(p, _)| p == phrase)
            .map(|(_, c)| *c)
            .collect()
    }
}
