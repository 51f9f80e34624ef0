//! Line-delimited JSON dataset: a header line, then one example per line
//! with `N` in raw-feature order and `null` for Empty.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExplanationClass, ExplanationStyle, LabeledExample, Sampling};
use crate::codec::{self, Decimal9};
use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;
use crate::sim::{EntityId, FailureScenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub config_digest: String,
    pub style: ExplanationStyle,
    pub sampling: Sampling,
    pub goal_places: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ExampleLine {
    episode_id: String,
    t: u32,
    #[serde(rename = "X")]
    x: Vec<EntityId>,
    #[serde(rename = "N")]
    n: Vec<Option<Decimal9>>,
    o: EntityId,
    label: String,
    scenario: FailureScenario,
    class: ExplanationClass,
}

pub fn save_dataset(path: &Path, header: &DatasetHeader, examples: &[LabeledExample]) -> Result<()> {
    let mut w = codec::create(path)?;
    codec::write_line(&mut w, header)?;
    for ex in examples {
        let line = ExampleLine {
            episode_id: ex.episode_id.clone(),
            t: ex.t,
            x: ex.features.entities.clone(),
            n: ex.features.raw().iter().map(|v| v.map(Decimal9)).collect(),
            o: ex.features.object.clone(),
            label: ex.target.clone(),
            scenario: ex.scenario,
            class: ex.class,
        };
        codec::write_line(&mut w, &line)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<(DatasetHeader, Vec<LabeledExample>)> {
    let lines = codec::lines(codec::open(path)?, path)?;
    let (head, rest) = lines
        .split_first()
        .ok_or_else(|| Error::Schema(format!("{}: empty dataset file", path.display())))?;
    let header: DatasetHeader = codec::parse(head)?;
    codec::check_schema(header.schema_version, &path.display().to_string())?;
    let examples = rest
        .iter()
        .map(|l| {
            let line: ExampleLine = codec::parse(l)?;
            let raw: Vec<Option<f64>> = line.n.iter().map(|v| v.map(|d| d.0)).collect();
            Ok(LabeledExample {
                episode_id: line.episode_id,
                t: line.t,
                features: FeatureVector::from_raw(line.x, &raw, line.o)?,
                target: line.label,
                class: line.class,
                scenario: line.scenario,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, examples))
}
