//! File-level steps behind the command-line tool. Every output lives under
//! one run directory and embeds the schema version and config digest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    annotate_all, cross_validate, episode_matrix, evaluate, missing, phrase_book, read_responses, scenario_counts,
    simulate, study_metrics, train_final, EvalReport, Explainer, StudyReport, TrainLog,
};
use crate::codec::{check_schema, read_json, write_json, SCHEMA_VERSION};
use crate::config::RunConfig;
use crate::dataset::io::{load_dataset, save_dataset, DatasetHeader};
use crate::dataset::{ExplanationClass, FoldPlan, LabeledExample};
use crate::error::{Error, Result};
use crate::featurizer::{extract, forward_fill};
use crate::neural::Checkpoint;
use crate::sim::io::{load_episode, save_episode};
use crate::sim::{Action, Episode, FailureScenario, Outcome};

pub const MANIFEST: &str = "manifest.json";
pub const FOLD_PLAN: &str = "folds.json";
pub const FINAL_CHECKPOINT: &str = "final.json";

/// Resolves configured paths against the run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
    pub config: RunConfig,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>, config: RunConfig) -> Self {
        RunDir {
            root: root.into(),
            config,
        }
    }

    pub fn episodes(&self) -> PathBuf {
        self.root.join(&self.config.paths.episodes)
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join(&self.config.paths.dataset)
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join(&self.config.paths.checkpoints)
    }

    pub fn fold_checkpoint(&self, fold: usize) -> PathBuf {
        self.checkpoints().join(format!("fold-{fold}.json"))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join(&self.config.paths.report)
    }

    pub fn report_table(&self) -> PathBuf {
        self.report().with_extension("txt")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub scenario: FailureScenario,
    pub object: String,
    pub goal_place: String,
    pub seed: u64,
    pub failed_action: Option<Action>,
    pub ticks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_digest: String,
    pub counts: BTreeMap<FailureScenario, usize>,
    pub episodes: Vec<ManifestEntry>,
}

/// Writes one JSONL trace per planned episode plus the manifest.
pub fn cmd_simulate(run: &RunDir) -> Result<Manifest> {
    let cfg = &run.config;
    let digest = cfg.digest();
    let specs = episode_matrix(cfg)?;
    let episodes = simulate(&specs)?;
    let dir = run.episodes();
    let mut entries = Vec::with_capacity(episodes.len());
    for (spec, (id, ep)) in specs.iter().zip(&episodes) {
        let file = format!("{id}.jsonl");
        save_episode(&dir.join(&file), ep, &digest)?;
        entries.push(ManifestEntry {
            id: id.clone(),
            file,
            scenario: spec.config.scenario,
            object: spec.config.object.to_string(),
            goal_place: spec.config.goal_place.to_string(),
            seed: spec.config.seed,
            failed_action: match ep.outcome {
                Outcome::Failed(a) => Some(a),
                Outcome::Success => None,
            },
            ticks: ep.snapshots.len(),
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_digest: digest,
        counts: scenario_counts(entries.iter().map(|e| &e.scenario)),
        episodes: entries,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_episodes(run: &RunDir) -> Result<Vec<(String, Episode)>> {
    let dir = run.episodes();
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(missing(&format!("episode manifest {}", path.display())));
    }
    let manifest: Manifest = read_json(&path)?;
    check_schema(manifest.schema_version, &path.display().to_string())?;
    manifest
        .episodes
        .iter()
        .map(|e| Ok((e.id.clone(), load_episode(&dir.join(&e.file))?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateSummary {
    pub examples: usize,
    pub by_class: BTreeMap<ExplanationClass, usize>,
}

/// Labels every simulated episode and writes the dataset file.
pub fn cmd_annotate(run: &RunDir) -> Result<AnnotateSummary> {
    let cfg = &run.config;
    let episodes = load_episodes(run)?;
    let examples = annotate_all(&episodes, cfg)?;
    let header = DatasetHeader {
        schema_version: SCHEMA_VERSION,
        config_digest: cfg.digest(),
        style: cfg.dataset.style,
        sampling: cfg.dataset.sampling,
        goal_places: cfg.dataset.goal_places.clone(),
    };
    save_dataset(&run.dataset(), &header, &examples)?;
    let mut by_class = BTreeMap::new();
    for ex in &examples {
        *by_class.entry(ex.class).or_default() += 1;
    }
    Ok(AnnotateSummary {
        examples: examples.len(),
        by_class,
    })
}

pub fn load_examples(run: &RunDir) -> Result<Vec<LabeledExample>> {
    let path = run.dataset();
    if !path.exists() {
        return Err(missing(&format!("dataset {}", path.display())));
    }
    let (header, examples) = load_dataset(&path)?;
    if header.style != run.config.dataset.style {
        return Err(Error::Config(format!(
            "dataset was annotated with style {:?} but the config asks for {:?}",
            header.style, run.config.dataset.style
        )));
    }
    Ok(examples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Stamped<T> {
    schema_version: u32,
    config_digest: String,
    #[serde(flatten)]
    body: T,
}

fn stamped<T>(run: &RunDir, body: T) -> Stamped<T> {
    Stamped {
        schema_version: SCHEMA_VERSION,
        config_digest: run.config.digest(),
        body,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PlanBody {
    plan: FoldPlan,
}

/// Cross-validated training: one checkpoint and training log per fold,
/// plus the fold plan.
pub fn cmd_train(run: &RunDir) -> Result<Vec<TrainLog>> {
    let examples = load_examples(run)?;
    let cv = cross_validate(&examples, &run.config)?;
    let dir = run.checkpoints();
    write_json(&dir.join(FOLD_PLAN), &stamped(run, PlanBody { plan: cv.plan.clone() }))?;
    let mut logs = Vec::new();
    for (f, (r, ck)) in cv.runs.iter().zip(&cv.checkpoints).enumerate() {
        ck.save(&run.fold_checkpoint(f))?;
        write_json(&dir.join(format!("fold-{f}.log.json")), &stamped(run, r.log()))?;
        logs.push(r.log());
    }
    Ok(logs)
}

/// Trains the deployment model on all examples.
pub fn cmd_train_final(run: &RunDir) -> Result<TrainLog> {
    let examples = load_examples(run)?;
    let (r, ck) = train_final(&examples, &run.config)?;
    let dir = run.checkpoints();
    ck.save(&dir.join(FINAL_CHECKPOINT))?;
    write_json(&dir.join("final.log.json"), &stamped(run, r.log()))?;
    Ok(r.log())
}

/// Predicts each example with the model of the fold that held it out and
/// writes the JSON report and its text rendering.
pub fn cmd_evaluate(run: &RunDir) -> Result<EvalReport> {
    let cfg = &run.config;
    let digest = cfg.digest();
    let examples = load_examples(run)?;
    let plan_path = run.checkpoints().join(FOLD_PLAN);
    if !plan_path.exists() {
        return Err(missing(&format!("fold plan {}", plan_path.display())));
    }
    let plan: Stamped<PlanBody> = read_json(&plan_path)?;
    check_schema(plan.schema_version, &plan_path.display().to_string())?;
    let plan = plan.body.plan;
    let mut checkpoints = Vec::with_capacity(plan.folds.len());
    for f in 0..plan.folds.len() {
        let path = run.fold_checkpoint(f);
        if !path.exists() {
            return Err(Error::Usage(format!("fold {f} is untrained: {} is missing", path.display())));
        }
        let ck = Checkpoint::load(&path)?;
        if ck.training.config_digest != digest || ck.training.fold != Some(f) {
            return Err(Error::Schema(format!(
                "{} was trained for a different config or fold",
                path.display()
            )));
        }
        checkpoints.push(ck);
    }
    plan.audit(&examples)?;
    let report = evaluate(&examples, &plan, &checkpoints, &phrase_book(cfg)?, cfg.dataset.style, &digest)?;
    write_json(&run.report(), &report)?;
    let table = run.report_table();
    std::fs::write(&table, report.table()).map_err(|e| Error::io(&table, e))?;
    Ok(report)
}

/// Phrase for tick `t` of a recorded episode.
pub fn cmd_explain(checkpoint: &Path, episode: &Path, t: u32) -> Result<String> {
    let ck = Checkpoint::load(checkpoint)?;
    let ep = forward_fill(&load_episode(episode)?);
    let snap = ep
        .snapshots
        .iter()
        .find(|s| s.t == t)
        .ok_or_else(|| Error::Usage(format!("episode has no tick {t}")))?;
    let c = &ep.config;
    let features = extract(snap, &c.object, &c.goal_place, c.world.goal_radius)?;
    Explainer::from_checkpoint(&ck)?.explain(&features)
}

/// Scores a response file; writes `metrics.json` when `out` is given.
pub fn cmd_metrics(responses: &Path, out: Option<&Path>) -> Result<StudyReport> {
    let records = read_responses(responses)?;
    if records.is_empty() {
        return Err(Error::Usage(format!("{} holds no responses", responses.display())));
    }
    let report = study_metrics(&records);
    if let Some(dir) = out {
        write_json(&dir.join("metrics.json"), &report)?;
    }
    Ok(report)
}
