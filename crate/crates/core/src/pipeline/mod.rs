//! Simulation-to-report orchestration: the episode matrix, annotation,
//! cross-validated training, evaluation and study scoring.

pub mod commands;
pub mod evaluate;
pub mod metrics;
pub mod train;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use evaluate::{evaluate, predict_class, ConfusionMatrix, EvalReport, Explainer, PredictionRecord};
pub use metrics::{read_responses, study_metrics, ResponseRecord, Scores, StudyReport};
pub use train::{train, EpochLog, Sample, StopReason, TrainLog, TrainRun};

use crate::config::RunConfig;
use crate::dataset::{annotate, make_folds, FoldPlan, LabeledExample, PhraseBook, Vocab};
use crate::error::{Error, Result};
use crate::featurizer::{MaskedInput, Standardizer};
use crate::neural::{Checkpoint, ModelParams, TrainingInfo};
use crate::sim::{run_episode, Episode, EpisodeConfig, FailureScenario};

/// One planned simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub id: String,
    pub config: EpisodeConfig,
}

/// Independent random stream `stream` of the master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const EPISODE_STREAM: u64 = 1;
const FOLD_STREAM: u64 = 100;
const FINAL_STREAM: u64 = 99;

/// Every failing scenario `episodes_per_scenario` times, then the
/// no-failure episodes. Objects and goal places cycle with the episode
/// index; per-episode seeds are drawn from the master seed.
pub fn episode_matrix(cfg: &RunConfig) -> Result<Vec<EpisodeSpec>> {
    let d = &cfg.dataset;
    let mut rng = stream_rng(cfg.seed, EPISODE_STREAM);
    let mut plan: Vec<(FailureScenario, usize)> = FailureScenario::FAILING
        .into_iter()
        .flat_map(|s| (0..d.episodes_per_scenario).map(move |k| (s, k)))
        .collect();
    plan.extend((0..d.success_episodes).map(|k| (FailureScenario::NoFailure, k)));
    plan.into_iter()
        .map(|(scenario, k)| {
            let mut config = EpisodeConfig::new(
                rng.gen(),
                &d.objects[k % d.objects.len()],
                &d.goal_places[k % d.goal_places.len()],
                scenario,
            )?;
            config.layout = d.layout.clone();
            config.world = cfg.world;
            config.validate()?;
            Ok(EpisodeSpec {
                id: format!("{}-{:02}", scenario.name(), k),
                config,
            })
        })
        .collect()
}

pub fn simulate(specs: &[EpisodeSpec]) -> Result<Vec<(String, Episode)>> {
    specs
        .par_iter()
        .map(|s| Ok((s.id.clone(), run_episode(&s.config)?)))
        .collect()
}

pub fn phrase_book(cfg: &RunConfig) -> Result<PhraseBook> {
    PhraseBook::new(cfg.dataset.style, cfg.dataset.goal_places.iter().map(String::as_str))
}

/// The closed output vocabulary: every canonical phrase of the configured
/// style, independent of which examples a fold sees.
pub fn vocabulary(cfg: &RunConfig) -> Result<Vocab> {
    let book = phrase_book(cfg)?;
    Vocab::build(book.phrases())
}

pub fn annotate_all(episodes: &[(String, Episode)], cfg: &RunConfig) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (id, ep) in episodes {
        out.extend(annotate(ep, id, cfg.dataset.style, cfg.dataset.sampling)?);
    }
    Ok(out)
}

pub fn encode_samples(
    examples: &[LabeledExample],
    indices: &[usize],
    vocab: &Vocab,
    standardizer: &Standardizer,
) -> Result<Vec<Sample>> {
    indices
        .iter()
        .map(|&i| {
            let ex = &examples[i];
            Ok(Sample {
                input: MaskedInput::from_features(&ex.features, Some(standardizer))?,
                target: vocab.encode(&ex.target)?,
            })
        })
        .collect()
}

/// Fits the standardizer on `train_idx`, initializes a model from `rng`,
/// trains, and packages the best parameters as a checkpoint.
pub fn fit(
    examples: &[LabeledExample],
    train_idx: &[usize],
    validation_idx: &[usize],
    cfg: &RunConfig,
    fold: Option<usize>,
    mut rng: ChaCha8Rng,
) -> Result<(TrainRun<f64>, Checkpoint)> {
    let vocab = vocabulary(cfg)?;
    let standardizer = Standardizer::fit(train_idx.iter().map(|&i| &examples[i].features));
    let train_set = encode_samples(examples, train_idx, &vocab, &standardizer)?;
    let validation = encode_samples(examples, validation_idx, &vocab, &standardizer)?;
    let init = ModelParams::<f64>::init(&cfg.model, vocab.len(), &mut rng)?;
    let run = train(init, &train_set, &validation, &cfg.train, &mut rng, fold)?;
    let info = TrainingInfo {
        config_digest: cfg.digest(),
        fold,
        best_epoch: run.best_epoch,
        best_validation_loss: Some(run.best_validation_loss()),
    };
    let ck = Checkpoint::new(&run.params, vocab, standardizer, info)?;
    Ok((run, ck))
}

/// Result of nested grouped cross-validation.
#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub plan: FoldPlan,
    pub runs: Vec<TrainRun<f64>>,
    pub checkpoints: Vec<Checkpoint>,
}

/// Trains one model per fold. Folds run in parallel; each derives its own
/// random stream, so results do not depend on scheduling.
pub fn cross_validate(examples: &[LabeledExample], cfg: &RunConfig) -> Result<CrossValidation> {
    let plan = make_folds(examples, cfg.folds.count, cfg.folds.grouping)?;
    plan.audit(examples)?;
    let fitted = (0..plan.folds.len())
        .into_par_iter()
        .map(|f| {
            let split = plan.split(examples, f)?;
            fit(
                examples,
                &split.train,
                &split.validation,
                cfg,
                Some(f),
                stream_rng(cfg.seed, FOLD_STREAM + f as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let (runs, checkpoints) = fitted.into_iter().unzip();
    Ok(CrossValidation { plan, runs, checkpoints })
}

/// Trains a deployment model on every example. The validation bucket of
/// the first fold still drives early stopping; nothing is held out for
/// testing.
pub fn train_final(examples: &[LabeledExample], cfg: &RunConfig) -> Result<(TrainRun<f64>, Checkpoint)> {
    let plan = make_folds(examples, cfg.folds.count, cfg.folds.grouping)?;
    let split = plan.split(examples, 0)?;
    let mut train_idx: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
    train_idx.sort_unstable();
    fit(
        examples,
        &train_idx,
        &split.validation,
        cfg,
        None,
        stream_rng(cfg.seed, FINAL_STREAM),
    )
}

/// Scenario counts, in scenario order.
pub fn scenario_counts<'a>(scenarios: impl IntoIterator<Item = &'a FailureScenario>) -> BTreeMap<FailureScenario, usize> {
    let mut m = BTreeMap::new();
    for s in scenarios {
        *m.entry(*s).or_default() += 1;
    }
    m
}

pub(crate) fn missing(what: &str) -> Error {
    Error::Usage(format!("{what} not found; run the earlier pipeline step first"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matrix_has_54_failing_episodes() {
        let m = episode_matrix(&RunConfig::default()).unwrap();
        assert_eq!(m.len(), 54);
        let counts = scenario_counts(m.iter().map(|s| &s.config.scenario));
        assert_eq!(counts.len(), 6);
        assert!(counts.values().all(|&n| n == 9));
        let ids: std::collections::BTreeSet<_> = m.iter().map(|s| &s.id).collect();
        assert_eq!(ids.len(), 54);
    }

    #[test]
    fn matrix_is_seeded() {
        let a = episode_matrix(&RunConfig::default()).unwrap();
        let mut cfg = RunConfig::default();
        assert_eq!(a, episode_matrix(&cfg).unwrap());
        cfg.seed += 1;
        assert_ne!(a, episode_matrix(&cfg).unwrap());
    }

    #[test]
    fn success_episodes_are_appended() {
        let mut cfg = RunConfig::default();
        cfg.dataset.episodes_per_scenario = 1;
        cfg.dataset.success_episodes = 2;
        let m = episode_matrix(&cfg).unwrap();
        assert_eq!(m.len(), 8);
        assert_eq!(m[7].id, "no_failure-01");
    }
}
