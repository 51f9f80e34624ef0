//! Study scoring over externally collected participant responses.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::codec::SCHEMA_VERSION;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub participant: String,
    pub trial: String,
    #[serde(deserialize_with = "flag")]
    pub action_correct: bool,
    #[serde(deserialize_with = "flag")]
    pub solution_correct: bool,
}

fn flag<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(serde::de::Error::custom(format!("`{other}` is not a boolean"))),
    }
}

/// Reads `participant,trial,action_correct,solution_correct` rows.
pub fn read_responses(path: &Path) -> Result<Vec<ResponseRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_responses(file)
}

pub fn parse_responses<R: std::io::Read>(reader: R) -> Result<Vec<ResponseRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let want = ["participant", "trial", "action_correct", "solution_correct"];
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(Error::Schema(format!(
            "response header must be `{}`, found `{}`",
            want.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Solution accuracy (`sol`) and action-identification accuracy (`aid`);
/// `None` when there is nothing to divide by.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub trials: usize,
    pub correct_solution: usize,
    pub correct_action: usize,
    pub sol: Option<f64>,
    pub aid: Option<f64>,
}

impl Scores {
    fn add(&mut self, r: &ResponseRecord) {
        self.trials += 1;
        self.correct_solution += usize::from(r.solution_correct);
        self.correct_action += usize::from(r.action_correct);
    }

    fn finish(mut self) -> Self {
        let share = |k: usize| (self.trials > 0).then(|| k as f64 / self.trials as f64);
        self.sol = share(self.correct_solution);
        self.aid = share(self.correct_action);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub pooled: Scores,
    pub participants: BTreeMap<String, Scores>,
}

impl StudyReport {
    /// Scores for `participant`; `None` when they have no records.
    pub fn participant(&self, participant: &str) -> Option<&Scores> {
        self.participants.get(participant)
    }
}

/// Per-participant and pooled ratios of correct to all responses.
pub fn study_metrics(records: &[ResponseRecord]) -> StudyReport {
    let mut pooled = Scores::default();
    let mut participants: BTreeMap<String, Scores> = BTreeMap::new();
    for r in records {
        pooled.add(r);
        participants.entry(r.participant.clone()).or_default().add(r);
    }
    StudyReport {
        schema_version: SCHEMA_VERSION,
        pooled: pooled.finish(),
        participants: participants.into_iter().map(|(k, v)| (k, v.finish())).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: &str, action: bool, solution: bool) -> ResponseRecord {
        ResponseRecord {
            participant: p.into(),
            trial: "t".into(),
            action_correct: action,
            solution_correct: solution,
        }
    }

    #[test]
    fn nine_of_twelve_is_three_quarters() {
        let rs: Vec<_> = (0..12).map(|i| rec("p1", true, i < 9)).collect();
        let m = study_metrics(&rs);
        assert_eq!(m.pooled.sol, Some(0.75));
        assert_eq!(m.pooled.aid, Some(1.0));
    }

    #[test]
    fn empty_input_is_absent_not_zero() {
        let m = study_metrics(&[]);
        assert_eq!(m.pooled.sol, None);
        assert_eq!(m.pooled.aid, None);
        assert!(m.participant("p9").is_none());
    }

    #[test]
    fn parses_csv_with_header_check() {
        let text = "participant,trial,action_correct,solution_correct\np1,1,true,false\np2, 2 ,1,0\n";
        let rs = parse_responses(text.as_bytes()).unwrap();
        assert_eq!(rs[0], ResponseRecord { trial: "1".into(), ..rec("p1", true, false) });
        assert_eq!(rs[1], ResponseRecord { trial: "2".into(), ..rec("p2", true, false) });
        assert!(parse_responses("who,trial,action_correct,solution_correct\n".as_bytes()).is_err());
        assert!(parse_responses("participant,trial,action_correct,solution_correct\np,1,maybe,1\n".as_bytes()).is_err());
    }
}
